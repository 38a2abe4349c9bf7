"""Command-line pipeline: span reports, synthetic experiments, reconstruction,
the invariant verification suite, and circuit-manifest export.

Configuration comes from an optional JSON file plus flag overrides; flags win.
All randomness derives from one root seed through labeled purpose strings, so
identical config and seed reproduce bit-identical artifacts.
"""

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import op_basis, probe_factory, process_sim, serialize, tomography
from .errors import ConfigError, ProctomoError


@dataclass
class RunConfig:
    dim: int = 2
    labs: int = 1
    preset: str = "HaarEnv"
    p: float = 0.5
    d_env: int = 2
    seed: int = 0
    shots: int = 0
    family: str = "auto"
    family_cap: int = 20000
    subsample: int | None = None
    tol: float = 1e-10
    span_tol: float = 1e-8
    prep: str = "zero"
    project_psd: bool = False
    threads: int | None = None
    out: str = "out"

    def validate(self):
        if self.dim < 2:
            raise ConfigError(f"dim must be >= 2 (got {self.dim})")
        if self.labs < 1:
            raise ConfigError(f"labs must be >= 1 (got {self.labs})")
        if self.shots < 0:
            raise ConfigError(f"shots must be >= 0 (got {self.shots})")
        if self.preset not in process_sim.PRESET_NAMES:
            raise ConfigError(f"preset must be one of {process_sim.PRESET_NAMES} "
                              f"(got {self.preset!r})")
        if self.family not in ("auto", "qubit16", "weyl_ancilla", "unitary_only",
                               "measure_prepare"):
            raise ConfigError(f"family {self.family!r} is not recognised")
        if self.prep not in ("zero", "maximally_mixed"):
            raise ConfigError(f"prep must be zero or maximally_mixed (got {self.prep!r})")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"p must lie in [0, 1] (got {self.p})")
        return self


def load_config(path: str | None, overrides: dict) -> RunConfig:
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        unknown = set(data) - fields
        if unknown:
            raise ConfigError(f"unknown config field {sorted(unknown)[0]!r}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig(**{k: v for k, v in data.items() if k in fields})
    return cfg.validate()


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _prep_state(cfg: RunConfig) -> np.ndarray:
    if cfg.prep == "maximally_mixed":
        return np.eye(cfg.dim, dtype=np.complex128) / cfg.dim
    rho = np.zeros((cfg.dim, cfg.dim), dtype=np.complex128)
    rho[0, 0] = 1.0
    return rho


def _build_family(cfg: RunConfig) -> probe_factory.ProbeFamily:
    choice = cfg.family
    if choice == "auto":
        choice = "qubit16" if (cfg.labs == 1 and cfg.dim == 2) else "weyl_ancilla"
    if choice == "qubit16":
        if cfg.dim != 2 or cfg.labs != 1:
            raise ConfigError("family qubit16 requires dim=2 and labs=1")
        return probe_factory.qubit16_family()
    if choice == "unitary_only":
        if cfg.dim != 2 or cfg.labs != 1:
            raise ConfigError("family unitary_only requires dim=2 and labs=1")
        return probe_factory.unitary_only_family()
    if choice == "measure_prepare":
        if cfg.labs != 1:
            raise ConfigError("family measure_prepare requires labs=1")
        return probe_factory.measure_prepare_family(cfg.dim)
    return probe_factory.weyl_ancilla_family(cfg.labs, cfg.dim,
                                         element_cap=cfg.family_cap,
                                         subsample_settings=cfg.subsample,
                                         seed=cfg.seed)


def cmd_span(cfg: RunConfig) -> int:
    report = op_basis.span_bound_reports(cfg.dim, seed=cfg.seed, tol=cfg.span_tol)
    os.makedirs(cfg.out, exist_ok=True)
    _write_json(os.path.join(cfg.out, "span.json"), report.as_dict())
    for row in report.rows:
        status = "ok" if row.match else "MISMATCH"
        print(f"span {row.family}: measured {row.measured}, formula {row.formula} [{status}]")
    return 0 if report.all_match else 1


def cmd_simulate(cfg: RunConfig) -> int:
    spec = process_sim.preset_process(cfg.preset, cfg.labs, cfg.dim,
                                      seed=cfg.seed, p=cfg.p, d_env=cfg.d_env)
    w_full = process_sim.build_process(spec, tol=cfg.tol)
    w_int = process_sim.interior_only(w_full, _prep_state(cfg), tol=cfg.tol)
    family = _build_family(cfg)
    records = process_sim.sample_shots(w_int, family, cfg.shots, seed=cfg.seed,
                                       threads=cfg.threads)
    os.makedirs(cfg.out, exist_ok=True)
    serialize.save_family(family, os.path.join(cfg.out, "family.jsonl"))
    with open(os.path.join(cfg.out, "records.json"), "w") as fh:
        fh.write(serialize.records_to_json(records))
    with open(os.path.join(cfg.out, "records.csv"), "w") as fh:
        fh.write(serialize.records_to_csv(records))
    w_payload = serialize.operator_to_json(w_int.op)
    w_payload["meta"] = {"interior": True, "preset": spec.name, "n_labs": cfg.labs,
                         "d_sys": cfg.dim, "seed": cfg.seed, "prep": cfg.prep}
    _write_json(os.path.join(cfg.out, "w_true.json"), w_payload)
    cfg_echo = dataclasses.asdict(cfg)
    cfg_echo.pop("out")  # location of the artifacts, not part of the run identity
    _write_json(os.path.join(cfg.out, "meta.json"),
                {"config": cfg_echo, "family_size": len(family),
                 "comb_max_violation": w_int.comb_report.max_violation})
    print(f"simulate: {len(family)} probe elements, shots={cfg.shots}, out={cfg.out}")
    return 0


def cmd_reconstruct(cfg: RunConfig) -> int:
    fam_path = os.path.join(cfg.out, "family.jsonl")
    rec_path = os.path.join(cfg.out, "records.json")
    if not (os.path.exists(fam_path) and os.path.exists(rec_path)):
        raise ConfigError(f"out dir {cfg.out!r} lacks simulate artifacts")
    family = serialize.load_family(fam_path)
    with open(rec_path) as fh:
        records = serialize.records_from_json(fh.read())
    bundle = tomography.build_frame(family, tol=cfg.tol)
    report = tomography.linear_inversion(bundle, records,
                                         project_psd=cfg.project_psd, tol=cfg.tol)
    truth_path = os.path.join(cfg.out, "w_true.json")
    if os.path.exists(truth_path):
        with open(truth_path) as fh:
            w_true = serialize.operator_from_json(json.load(fh))
        report.metrics = tomography.reconstruction_metrics(w_true, report.w_est)
    payload = report.as_dict()
    payload["w_est"] = serialize.operator_to_json(report.w_est)
    _write_json(os.path.join(cfg.out, "report.json"), payload)
    line = (f"reconstruct: rank {report.frame_rank}, "
            f"psd_violation {report.psd_violation:.3e}, "
            f"comb_violation {report.comb_violation:.3e}")
    if report.metrics:
        line += f", frobenius_error {report.metrics['frobenius_error']:.3e}"
    print(line)
    return 0


def cmd_export_circuits(cfg: RunConfig) -> int:
    family = _build_family(cfg)
    manifests = serialize.family_manifests(family)
    os.makedirs(cfg.out, exist_ok=True)
    _write_json(os.path.join(cfg.out, "circuits.json"), manifests)
    print(f"export-circuits: {len(manifests)} settings -> {cfg.out}/circuits.json")
    return 0


def _verify_checks(cfg: RunConfig):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xEF]))
    checks = []

    report = op_basis.span_bound_reports(cfg.dim, seed=cfg.seed, tol=cfg.span_tol)
    checks.append(("span_formulas", report.all_match,
                   {r.family: r.measured for r in report.rows}))

    design = op_basis.clifford_design_qubit()
    worst = 0.0
    for _ in range(20):
        x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        worst = max(worst, float(np.max(np.abs(
            op_basis.haar_twirl2(x) - op_basis.design_twirl2(x, design)))))
    checks.append(("clifford_twirl", worst <= 1e-10, {"max_delta": worst}))

    worst = 0.0
    for _ in range(20):
        a = op_basis.haar_state(2, rng)
        psi = op_basis.haar_state(2, rng)
        e0, _ = probe_factory.measure_prepare_instrument(a, psi)
        target = np.kron(np.outer(a, a.conj()).T, np.outer(psi, psi.conj()))
        worst = max(worst, float(np.linalg.norm(e0.choi.mat - target)))
    checks.append(("measure_prepare_choi", worst <= 1e-10, {"max_frobenius": worst}))

    n_filter = max(2, min(cfg.labs, 3))
    worst = 0.0
    for _ in range(6):
        pairs = [tuple(int(x) for x in rng.integers(0, 4, 2)) for _ in range(n_filter)]
        us = probe_factory.weyl_lab_unitaries(2, pairs)
        grids = {}
        import itertools as _it
        for thetas in _it.product(probe_factory.THETA_GRID, repeat=n_filter - 1):
            st = probe_factory.AncillaProbeSetting(probe_factory.KET0, tuple(us),
                                                   thetas, outcome=0)
            grids[thetas] = probe_factory.ancilla_superinstrument(st).choi
        cur = grids
        for axis in range(n_filter - 1):
            nxt = {}
            rests = sorted({k[1:] for k in cur})
            for rest in rests:
                nxt[rest] = probe_factory.phase_filter(
                    {k[0]: v for k, v in cur.items() if k[1:] == rest})
            cur = nxt
        iso = cur[()]
        oracle = probe_factory.weyl_isolated_term(2, pairs)
        worst = max(worst, float(np.max(np.abs(iso.mat - oracle.mat))))
    checks.append(("phase_filter_isolation", worst <= 1e-9, {"max_delta": worst}))

    comb_ok, comb_worst = True, 0.0
    for preset in ("IdentityWire", "HaarEnv", "ClassicalMemory"):
        spec = process_sim.preset_process(preset, cfg.labs, 2, seed=cfg.seed)
        w = process_sim.build_process(spec)
        comb_worst = max(comb_worst, w.comb_report.max_violation)
        comb_ok = comb_ok and w.comb_report.passed
    checks.append(("preset_comb", comb_ok, {"max_violation": comb_worst}))

    worst_rank = 0
    n_probe_labs = max(2, cfg.labs)
    for _ in range(5):
        us = []
        for _ in range(n_probe_labs):
            k00 = rng.uniform(0, 1) * op_basis.haar_unitary(2, rng)
            us.append(probe_factory.block_unitary(probe_factory.BlockUnitarySpec(
                k00, op_basis.haar_unitary(2, rng), op_basis.haar_unitary(2, rng))))
        st = probe_factory.AncillaProbeSetting(
            probe_factory.KET0, tuple(us),
            tuple(rng.uniform(-np.pi, np.pi, n_probe_labs - 1)), outcome=0)
        e = probe_factory.ancilla_superinstrument(st)
        for k in range(1, n_probe_labs):
            worst_rank = max(worst_rank, probe_factory.operator_schmidt_rank(
                e, set(range(1, k + 1))))
    checks.append(("schmidt_bound", worst_rank <= 4, {"max_rank": worst_rank}))

    q16 = probe_factory.qubit16_family()
    bundle = tomography.build_frame(q16)
    resid = tomography.dual_identity_check(bundle) if bundle.is_complete else float("inf")
    checks.append(("qubit16_frame", bundle.rank == 16 and resid <= 1e-8,
                   {"rank": bundle.rank, "dual_residual": resid}))
    return checks


def cmd_verify(cfg: RunConfig) -> int:
    checks = _verify_checks(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    payload = []
    all_ok = True
    for name, ok, detail in checks:
        all_ok = all_ok and ok
        payload.append({"check": name, "passed": bool(ok), "detail": detail})
        print(f"[{'PASS' if ok else 'FAIL'}] {name} {detail}")
    _write_json(os.path.join(cfg.out, "verify.json"),
                {"passed": all_ok, "checks": payload})
    return 0 if all_ok else 1


COMMANDS = {
    "span": cmd_span,
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "verify": cmd_verify,
    "export-circuits": cmd_export_circuits,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proctomo",
        description="Multi-time process simulation and tomography pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--dim", type=int, default=None)
        p.add_argument("--labs", type=int, default=None)
        p.add_argument("--shots", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--preset", default=None)
        p.add_argument("--p", type=float, default=None, dest="p")
        p.add_argument("--d-env", type=int, default=None, dest="d_env")
        p.add_argument("--family", default=None)
        p.add_argument("--subsample", type=int, default=None)
        p.add_argument("--prep", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--project-psd", action="store_const", const=True,
                       default=None, dest="project_psd")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except ProctomoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
