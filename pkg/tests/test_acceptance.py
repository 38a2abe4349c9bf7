"""Acceptance suite: one test per release criterion; each prints one
pass/fail line with the measured values on the real terminal."""

import filecmp
import time

import numpy as np
import pytest

from proctomo import cli, op_basis, tomography
from proctomo.choi_link import CombDirection, validate_comb
from proctomo.errors import OutsideSpan
from proctomo.op_basis import (
    Normalization,
    clifford_design_qubit,
    design_twirl2,
    haar_state,
    haar_twirl2,
    kpq_operator,
    moment_matrix,
    span_bound_reports,
    weyl_basis,
)
from proctomo.probe_factory import (
    KET0,
    THETA_GRID,
    AncillaProbeSetting,
    BlockUnitarySpec,
    ancilla_superinstrument,
    block_unitary,
    measure_prepare_family,
    operator_schmidt_rank,
    qubit16_family,
    measure_prepare_instrument,
    weyl_isolated_term,
    weyl_lab_unitaries,
    unitary_only_family,
)
from proctomo.process_sim import (
    build_process,
    interior_only,
    preset_process,
    sample_shots,
)
from proctomo.tensor_core import LabeledOperator, tensor

from conftest import random_hermitian


def test_c01_span_dimensions(announce):
    t0 = time.monotonic()
    results = {}
    for d, expected in ((2, (10, 13, 16)), (3, (65, 73, 81))):
        report = span_bound_reports(d, tol=1e-8)
        results[d] = tuple(r.measured for r in report.rows)
        assert results[d] == expected, f"d={d}: measured {results[d]}, expected {expected}"
    elapsed = time.monotonic() - t0
    assert elapsed < 30.0
    announce(f"ACCEPTANCE 1 PASS: spans d=2 {results[2]}, d=3 {results[3]} "
             f"({elapsed:.1f} s)")


def test_c02_qubit16_counts(qubit16, announce):
    bundle = tomography.build_frame(qubit16)
    rank10 = tomography.build_frame(unitary_only_family()).rank
    assert len(qubit16) == 16
    assert bundle.rank == 16
    assert rank10 == 10
    announce(f"ACCEPTANCE 2 PASS: 16 elements, frame rank {bundle.rank}, "
             f"unitary sub-family rank {rank10}")


def test_c03_measure_prepare_choi(announce):
    rng = np.random.default_rng(301)
    worst = 0.0
    for _ in range(20):
        a, psi = haar_state(2, rng), haar_state(2, rng)
        e0, _ = measure_prepare_instrument(a, psi)
        target = np.kron(np.outer(a, a.conj()).T, np.outer(psi, psi.conj()))
        worst = max(worst, float(np.linalg.norm(e0.choi.mat - target)))
    assert worst <= 1e-10
    announce(f"ACCEPTANCE 3 PASS: 20 random measure-prepare circuits, "
             f"max Frobenius deviation {worst:.2e}")


def test_c04_weyl_family_two_labs(weyl_n2, announce):
    t0 = time.monotonic()
    fam = weyl_n2
    assert len(fam) == 2048
    bundle = tomography.build_frame(fam)
    assert bundle.rank == 256

    # PSD for every element, tester combs per setting
    worst_eig = 0.0
    for e in fam:
        h = (e.choi.mat + e.choi.mat.conj().T) / 2
        worst_eig = min(worst_eig, float(np.linalg.eigvalsh(h)[0]))
    assert worst_eig >= -1e-10
    worst_comb = 0.0
    for sid, elems in fam.settings().items():
        total = LabeledOperator(elems[0].choi.labels, sum(e.choi.mat for e in elems))
        rep = validate_comb(total, direction=CombDirection.TESTER, tol=1e-10)
        worst_comb = max(worst_comb, rep.max_violation)
        assert rep.passed, f"setting {sid} violates tester comb by {rep.max_violation:.2e}"

    # phase filter vs tensor oracle on every Weyl index block
    grouped = {}
    for e in fam:
        if e.outcome != "0":
            continue
        key = tuple(tuple(p) for p in e.meta["pairs"])
        grouped.setdefault(key, {})[e.meta["thetas"][0]] = e.choi
    assert len(grouped) == 256
    worst_filter = 0.0
    from proctomo.probe_factory import phase_filter
    for pairs, values in grouped.items():
        filt = phase_filter(values)
        oracle = weyl_isolated_term(2, list(pairs))
        worst_filter = max(worst_filter, float(np.max(np.abs(filt.mat - oracle.mat))))
    assert worst_filter <= 1e-10
    elapsed = time.monotonic() - t0
    assert elapsed < 300.0
    announce(f"ACCEPTANCE 4 PASS: 2048 elements, rank 256, min eig {worst_eig:.1e}, "
             f"tester comb {worst_comb:.1e}, filter dev {worst_filter:.1e} ({elapsed:.0f} s)")


def test_c05_three_lab_isolation(announce):
    t0 = time.monotonic()
    rng = np.random.default_rng(505)
    n_settings = 256
    chosen = rng.choice((4 * 4) ** 3, size=n_settings, replace=False)
    worst = 0.0
    for s_idx in chosen:
        idx = int(s_idx)
        pairs = []
        for _ in range(3):
            idx, rem = divmod(idx, 16)
            pairs.append((rem // 4, rem % 4))
        pairs = list(reversed(pairs))
        us = weyl_lab_unitaries(2, pairs)
        grid = {}
        for t1 in THETA_GRID:
            for t2 in THETA_GRID:
                st = AncillaProbeSetting(KET0, tuple(us), (t1, t2), outcome=0)
                grid[(t1, t2)] = ancilla_superinstrument(st).choi
        from proctomo.probe_factory import phase_filter
        stage = {t2: phase_filter({t1: grid[(t1, t2)] for t1 in THETA_GRID})
                 for t2 in THETA_GRID}
        iso = phase_filter(stage)
        oracle = weyl_isolated_term(2, pairs)
        worst = max(worst, float(np.max(np.abs(iso.mat - oracle.mat))))
    assert worst <= 1e-9
    elapsed = time.monotonic() - t0
    assert elapsed < 600.0
    announce(f"ACCEPTANCE 5 PASS: 256 three-lab settings, nested-filter deviation "
             f"{worst:.2e} ({elapsed:.0f} s)")


def test_c06_two_design_identities(announce):
    basis = weyl_basis(2, Normalization.HS_ORTHONORMAL)
    design = clifford_design_qubit()
    m = moment_matrix(design, basis)
    worst_m = 0.0
    for p in range(3):
        for q in range(3):
            for i in range(3):
                for j in range(3):
                    expected = 1.0 if (p == i and q == j) else 0.0
                    worst_m = max(worst_m, abs(m[p, q, i, j] - expected))
    assert worst_m <= 1e-10
    worst_k = 0.0
    for p in range(1, 4):
        for q in range(1, 4):
            k = kpq_operator(p, q, design=design, basis=basis)
            target = np.kron(basis.matrix(p).T, basis.matrix(q))
            worst_k = max(worst_k, float(np.max(np.abs(k.mat - target))))
    assert worst_k <= 1e-10
    rng = np.random.default_rng(606)
    worst_t = 0.0
    for _ in range(20):
        x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        worst_t = max(worst_t, float(np.max(np.abs(
            haar_twirl2(x) - design_twirl2(x, design)))))
    assert worst_t <= 1e-10
    announce(f"ACCEPTANCE 6 PASS: moment matrix dev {worst_m:.1e}, "
             f"K_pq dev {worst_k:.1e}, twirl dev {worst_t:.1e}")


def test_c07_end_to_end_tomography(qubit16, qubit16_bundle, weyl_n2, announce):
    bundle2 = tomography.build_frame(weyl_n2)
    exact = {}
    for preset in ("HaarEnv", "ClassicalMemory"):
        w1 = interior_only(build_process(preset_process(preset, 1, 2, seed=71)))
        rep1 = tomography.linear_inversion(qubit16_bundle, sample_shots(w1, qubit16, 0))
        err1 = tomography.reconstruction_metrics(w1, rep1.w_est)["frobenius_error"]
        assert err1 <= 1e-8, f"{preset} N=1 error {err1:.2e}"
        w2 = interior_only(build_process(preset_process(preset, 2, 2, seed=72)))
        rep2 = tomography.linear_inversion(bundle2, sample_shots(w2, weyl_n2, 0))
        err2 = tomography.reconstruction_metrics(w2, rep2.w_est)["frobenius_error"]
        assert err2 <= 1e-7, f"{preset} N=2 error {err2:.2e}"
        exact[preset] = (err1, err2)

    w = interior_only(build_process(preset_process("HaarEnv", 1, 2, seed=73)))
    medians = []
    for shots in (10 ** 3, 10 ** 4, 10 ** 5):
        errs = []
        for seed in range(10):
            rep = tomography.linear_inversion(
                qubit16_bundle, sample_shots(w, qubit16, shots, seed=seed))
            errs.append(tomography.reconstruction_metrics(w, rep.w_est)["frobenius_error"])
        medians.append(float(np.median(errs)))
    assert medians[0] > medians[1] > medians[2]
    announce("ACCEPTANCE 7 PASS: exact errors "
             + ", ".join(f"{k} {v[0]:.1e}/{v[1]:.1e}" for k, v in exact.items())
             + f"; shot medians {medians[0]:.3f} > {medians[1]:.3f} > {medians[2]:.3f}")


def test_c08_schmidt_rank_bounds(announce):
    rng = np.random.default_rng(808)
    worst = 0
    for n_labs in (2, 3):
        for _ in range(10):
            specs = [BlockUnitarySpec(rng.uniform(0, 1) * op_basis.haar_unitary(2, rng),
                                      op_basis.haar_unitary(2, rng),
                                      op_basis.haar_unitary(2, rng))
                     for _ in range(n_labs)]
            us = tuple(block_unitary(s) for s in specs)
            st = AncillaProbeSetting(KET0, us,
                                     tuple(rng.uniform(-np.pi, np.pi, n_labs - 1)),
                                     outcome=int(rng.integers(0, 2)))
            e = ancilla_superinstrument(st)
            for k in range(1, n_labs):
                worst = max(worst, operator_schmidt_rank(e, set(range(1, k + 1))))
    assert worst <= 4
    # product probes have rank exactly 1 across every cut
    q16 = qubit16_family()
    base = q16.elements[5].choi
    shifted = LabeledOperator(
        tuple(type(l)(l.lab + 1, l.role, l.dim) for l in base.labels), base.mat)
    product = tensor(base, shifted)
    ranks = {operator_schmidt_rank(product, {1}), operator_schmidt_rank(product, {2})}
    assert ranks == {1}
    announce(f"ACCEPTANCE 8 PASS: ancilla probes max bond {worst} <= 4 across "
             f"contiguous cuts (N<=3), product probes rank 1")


def test_c09_functional_estimation(qubit16, qubit16_bundle, announce):
    rng = np.random.default_rng(909)
    w = interior_only(build_process(preset_process("HaarEnv", 1, 2, seed=90)))
    records = sample_shots(w, qubit16, 0)
    worst = 0.0
    for _ in range(20):
        o = LabeledOperator(qubit16_bundle.labels, random_hermitian(rng, 4))
        value, _, _ = tomography.estimate_functional(o, qubit16_bundle, records)
        direct = float(np.trace(w.mat.T @ o.mat).real)
        worst = max(worst, abs(value - direct))
    assert worst <= 1e-8

    unitary_bundle = tomography.build_frame(unitary_only_family())
    unitary_records = sample_shots(w, unitary_only_family(), 0)
    mp_choi = measure_prepare_family(2).elements[0].choi
    with pytest.raises(OutsideSpan):
        tomography.estimate_functional(
            LabeledOperator(unitary_bundle.labels, mp_choi.mat),
            unitary_bundle, unitary_records)
    announce(f"ACCEPTANCE 9 PASS: functional deviation {worst:.2e}; "
             f"measure-prepare observable rejected by unitary-only bundle")


def test_c10_pipeline_determinism(tmp_path, announce):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        assert cli.main(["simulate", "--preset", "HaarEnv", "--labs", "1",
                         "--shots", "2000", "--seed", "42", "--out", str(out)]) == 0
        assert cli.main(["reconstruct", "--out", str(out)]) == 0
    names = ("meta.json", "w_true.json", "family.jsonl", "records.json",
             "records.csv", "report.json")
    for name in names:
        assert filecmp.cmp(out_a / name, out_b / name, shallow=False), name
    announce("ACCEPTANCE 10 PASS: simulate+reconstruct rerun is bit-identical "
             f"across {len(names)} artifacts")
