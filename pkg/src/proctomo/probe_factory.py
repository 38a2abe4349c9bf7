"""Construction of probe families: single-lab measure-and-prepare circuits,
the 16-element qubit set, block unitaries, qubit-ancilla superinstruments for
N labs, phase filters, and operator Schmidt ranks.

All probes are Choi operators on the per-lab (Input, Output) factors in
canonical order (I1, O1, I2, O2, ...). The ancilla is a single qubit prepared
in |0>, threaded through every lab, and measured in the computational basis at
the end; phase gates on the ancilla sit between consecutive labs.
"""

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import choi_link, op_basis
from .choi_link import choi_of_kraus, choi_of_unitary, link_product
from .errors import (
    BadCut,
    DimMismatch,
    InvalidSetting,
    MissingSample,
    NotNormalized,
    OutOfBudget,
    SingularValueExceedsOne,
)
from .op_basis import (
    Normalization,
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    HADAMARD,
    weyl_basis,
)
from .tensor_core import (
    DEFAULT_TOL,
    LabeledOperator,
    Role,
    SpaceLabel,
    canonicalize,
    permute_systems,
    sqrt_psd,
)

THETA_GRID = (0.0, np.pi, np.pi / 2, -np.pi / 2)


class Provenance(enum.Enum):
    QUBIT16 = "Qubit16"
    WEYL_ANCILLA = "WeylAncilla"
    UNITARY_ONLY = "UnitaryOnly"
    MEASURE_PREPARE = "MeasurePrepare"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class ProbeElement:
    setting_id: str
    outcome: str
    choi: LabeledOperator
    meta: dict = field(default_factory=dict)

    @property
    def record_key(self) -> tuple[str, str]:
        return (self.setting_id, self.outcome)


@dataclass(frozen=True)
class ProbeFamily:
    elements: tuple[ProbeElement, ...]
    provenance: Provenance = Provenance.CUSTOM

    def __post_init__(self):
        elems = tuple(self.elements)
        if elems:
            sig = elems[0].choi.keys
            for e in elems[1:]:
                if e.choi.keys != sig:
                    raise InvalidSetting(
                        f"inconsistent label signature: {e.choi.keys} vs {sig}")
        object.__setattr__(self, "elements", elems)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def chois(self) -> list[LabeledOperator]:
        return [e.choi for e in self.elements]

    def settings(self) -> dict[str, list[ProbeElement]]:
        grouped: dict[str, list[ProbeElement]] = {}
        for e in self.elements:
            grouped.setdefault(e.setting_id, []).append(e)
        return grouped


def lab_labels(lab: int, d: int) -> tuple[SpaceLabel, SpaceLabel]:
    return (SpaceLabel(lab, Role.INPUT, d), SpaceLabel(lab, Role.OUTPUT, d))


# ---------------------------------------------------------------------------
# Block unitaries with a qubit ancilla
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockUnitarySpec:
    k00: np.ndarray
    v: np.ndarray
    w: np.ndarray


def block_unitary(spec: BlockUnitarySpec, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Joint system-ancilla unitary with prescribed K00 block.

    Off-diagonal blocks are K01 = sqrt(I - K00 K00^dag) V and
    K10 = W sqrt(I - K00^dag K00); the remaining block is forced to
    K11 = -W K00^dag V. System is the first tensor factor, ancilla the second.
    """
    k00 = np.asarray(spec.k00, dtype=np.complex128)
    v = np.asarray(spec.v, dtype=np.complex128)
    w = np.asarray(spec.w, dtype=np.complex128)
    d = k00.shape[0]
    smax = float(np.linalg.norm(k00, 2))
    if smax > 1.0 + tol:
        raise SingularValueExceedsOne(f"largest singular value {smax:.6f} exceeds one")
    eye = np.eye(d, dtype=np.complex128)
    d_left = sqrt_psd(eye - k00 @ k00.conj().T, tol=max(tol, 1e-12))
    d_right = sqrt_psd(eye - k00.conj().T @ k00, tol=max(tol, 1e-12))
    blocks = {
        (0, 0): k00,
        (0, 1): d_left @ v,
        (1, 0): w @ d_right,
        (1, 1): -w @ k00.conj().T @ v,
    }
    u = np.zeros((2 * d, 2 * d), dtype=np.complex128)
    for (m, n), blk in blocks.items():
        unit = np.zeros((2, 2), dtype=np.complex128)
        unit[m, n] = 1.0
        u += np.kron(blk, unit)
    return u


def ancilla_block(u: np.ndarray, m: int, n: int) -> np.ndarray:
    """Block K_mn = (I (x) <m|) U (I (x) |n>) of a system-ancilla unitary."""
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] % 2:
        raise DimMismatch(f"expected a square system (x) qubit matrix, got {u.shape}")
    d = u.shape[0] // 2
    return u.reshape(d, 2, d, 2)[:, m, :, n]


def extract_blocks(u: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
    """All four ancilla blocks of a joint unitary, keyed by branch (m, n)."""
    return {(m, n): ancilla_block(u, m, n) for m in (0, 1) for n in (0, 1)}


# ---------------------------------------------------------------------------
# Single-lab measure-and-prepare circuits and fixed qubit families
# ---------------------------------------------------------------------------

def unitary_with_first_column(v: np.ndarray) -> np.ndarray:
    """Deterministic unitary whose first column is the given unit vector."""
    v = np.asarray(v, dtype=np.complex128)
    d = v.size
    cols = [v]
    for j in range(d):
        e = np.zeros(d, dtype=np.complex128)
        e[j] = 1.0
        for c in cols:
            e = e - c * np.vdot(c, e)
        nrm = np.linalg.norm(e)
        if nrm > 1e-8:
            cols.append(e / nrm)
        if len(cols) == d:
            break
    return np.stack(cols, axis=1)


def controlled_flip(d: int) -> np.ndarray:
    """C_X on system (x) ancilla: flips the ancilla unless the system is |0>."""
    p0 = np.zeros((d, d), dtype=np.complex128)
    p0[0, 0] = 1.0
    return np.kron(p0, PAULI_I) + np.kron(np.eye(d) - p0, PAULI_X)


def measure_prepare_joint_unitary(a_effect: np.ndarray, psi_prep: np.ndarray) -> np.ndarray:
    """Joint unitary (V (x) I) C_X (U (x) I) whose outcome-0 Kraus is
    |psi><a|, i.e. the measure-and-prepare branch for effect a and state psi."""
    a = np.asarray(a_effect, dtype=np.complex128)
    psi = np.asarray(psi_prep, dtype=np.complex128)
    d = a.size
    u = unitary_with_first_column(a).conj().T   # <0| U = <a|
    v = unitary_with_first_column(psi)          # V |0> = |psi>
    return np.kron(v, PAULI_I) @ controlled_flip(d) @ np.kron(u, PAULI_I)


def measure_prepare_instrument(a_effect, psi_prep, lab: int = 1,
                               setting_id: str | None = None) -> tuple[ProbeElement, ProbeElement]:
    """Both outcomes of the single-lab qubit-ancilla circuit.

    Outcome 0 has Choi |a><a|^T (x) |psi><psi|; outcome 1 completes the
    instrument to a CPTP pair.
    """
    a = np.asarray(a_effect, dtype=np.complex128)
    psi = np.asarray(psi_prep, dtype=np.complex128)
    for name, s in (("a_effect", a), ("psi_prep", psi)):
        if abs(np.linalg.norm(s) - 1.0) > 1e-10:
            raise NotNormalized(f"{name} has norm {np.linalg.norm(s):.6f}")
    u_sa = measure_prepare_joint_unitary(a, psi)
    labels = lab_labels(lab, a.size)
    if setting_id is None:
        setting_id = f"mp(a={np.round(a, 6)},psi={np.round(psi, 6)})"
    out = []
    for m in (0, 1):
        kraus = ancilla_block(u_sa, m, 0)
        choi = choi_of_kraus([kraus], labels[:1], labels[1:])
        out.append(ProbeElement(setting_id, str(m), choi.op,
                                meta={"kind": "measure_prepare_circuit", "outcome": m}))
    return out[0], out[1]


def _rotation(axis: np.ndarray, theta: float) -> np.ndarray:
    return np.cos(theta / 2) * PAULI_I - 1j * np.sin(theta / 2) * axis


QUBIT16_UNITARIES: tuple[tuple[str, np.ndarray], ...] = (
    ("I", PAULI_I),
    ("X", PAULI_X),
    ("Y", PAULI_Y),
    ("Z", PAULI_Z),
    ("RX90", _rotation(PAULI_X, np.pi / 2)),
    ("RY90", _rotation(PAULI_Y, np.pi / 2)),
    ("RZ90", _rotation(PAULI_Z, np.pi / 2)),
    ("H", HADAMARD),
    ("RZ90.X", _rotation(PAULI_Z, np.pi / 2) @ PAULI_X),
    ("RX90.Y", _rotation(PAULI_X, np.pi / 2) @ PAULI_Y),
)

_PAULI_EIGENVECTORS = {
    "X": (np.array([1, 1], dtype=np.complex128) / np.sqrt(2),
          np.array([1, -1], dtype=np.complex128) / np.sqrt(2)),
    "Y": (np.array([1, 1j], dtype=np.complex128) / np.sqrt(2),
          np.array([1, -1j], dtype=np.complex128) / np.sqrt(2)),
    "Z": (np.array([1, 0], dtype=np.complex128),
          np.array([0, 1], dtype=np.complex128)),
}


def unitary_only_family(lab: int = 1) -> ProbeFamily:
    """The ten deterministic single-qubit probes as one-outcome settings."""
    labels = lab_labels(lab, 2)
    elems = [ProbeElement(f"U:{name}", "0",
                          choi_of_unitary(u, labels[:1], labels[1:]).op,
                          meta={"kind": "unitary", "name": name})
             for name, u in QUBIT16_UNITARIES]
    return ProbeFamily(tuple(elems), Provenance.UNITARY_ONLY)


def qubit16_family(lab: int = 1) -> ProbeFamily:
    """Ten unitary probes plus the six Pauli measure-and-prepare probes.

    Each measure-and-prepare setting prepares the ancilla in the +1 eigenstate
    of a Pauli, swaps it with the system, and reads the ancilla out in the same
    basis; the two outcomes give effects |p+-><p+-|^T with prepared state |p+>.
    """
    labels = lab_labels(lab, 2)
    elems = list(unitary_only_family(lab).elements)
    for basis_name, (plus, minus) in _PAULI_EIGENVECTORS.items():
        prep = np.outer(plus, plus.conj())
        for sign, eff_vec in (("+", plus), ("-", minus)):
            effect_t = np.outer(eff_vec, eff_vec.conj()).T
            choi = LabeledOperator(labels, np.kron(effect_t, prep))
            elems.append(ProbeElement(f"MP:{basis_name}", sign, choi,
                                      meta={"kind": "measure_prepare",
                                            "basis": basis_name, "outcome": sign}))
    return ProbeFamily(tuple(elems), Provenance.QUBIT16)


def measure_prepare_family(d: int = 2, lab: int = 1) -> ProbeFamily:
    """Measure-and-prepare probes over the d^2 x d^2 state-tomography grid,
    with the complementary outcome completing each setting to an instrument."""
    labels = lab_labels(lab, d)
    states = op_basis.tomography_state_vectors(d)
    elems = []
    eye = np.eye(d, dtype=np.complex128)
    for i, a in enumerate(states):
        proj = np.outer(a, a.conj())
        for j, psi in enumerate(states):
            prep = np.outer(psi, psi.conj())
            sid = f"MP:{i}:{j}"
            elems.append(ProbeElement(sid, "0",
                                      LabeledOperator(labels, np.kron(proj.T, prep)),
                                      meta={"effect": i, "prep": j}))
            elems.append(ProbeElement(sid, "1",
                                      LabeledOperator(labels, np.kron((eye - proj).T, prep)),
                                      meta={"effect": i, "prep": j, "complement": True}))
    return ProbeFamily(tuple(elems), Provenance.MEASURE_PREPARE)


# ---------------------------------------------------------------------------
# Qubit-ancilla superinstruments for N labs
# ---------------------------------------------------------------------------

KET0 = np.array([1, 0], dtype=np.complex128)


@dataclass(frozen=True)
class AncillaProbeSetting:
    psi: np.ndarray
    lab_unitaries: tuple[np.ndarray, ...]
    thetas: tuple[float, ...]
    outcome: int = 0

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=np.complex128)
        us = tuple(np.asarray(u, dtype=np.complex128) for u in self.lab_unitaries)
        if psi.shape != (2,) or abs(np.linalg.norm(psi) - 1.0) > 1e-10:
            raise InvalidSetting("ancilla state must be a normalised qubit vector")
        if not us:
            raise InvalidSetting("at least one lab unitary required")
        side = us[0].shape[0]
        for u in us:
            if u.shape != (side, side) or np.max(np.abs(u.conj().T @ u - np.eye(side))) > 1e-9:
                raise InvalidSetting("lab unitaries must be unitary and share one dimension")
        if len(self.thetas) != len(us) - 1:
            raise InvalidSetting(f"need {len(us) - 1} phases, got {len(self.thetas)}")
        if self.outcome not in (0, 1):
            raise InvalidSetting("ancilla outcome must be 0 or 1")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "lab_unitaries", us)
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))

    @property
    def n_labs(self) -> int:
        return len(self.lab_unitaries)

    @property
    def d_sys(self) -> int:
        return self.lab_unitaries[0].shape[0] // 2


def phase_gate(theta: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * theta)]).astype(np.complex128)


def ancilla_superinstrument(setting: AncillaProbeSetting) -> ProbeElement:
    """Chain the ancilla state, phase-modified joint unitaries, and the final
    ancilla projector into one multi-lab probe Choi on (I1, O1, ..., IN, ON)."""
    n, d = setting.n_labs, setting.d_sys
    anc = [SpaceLabel(t, Role.ANCILLA, 2) for t in range(n + 1)]
    psi_op = LabeledOperator((anc[0],), np.outer(setting.psi, setting.psi.conj()))
    acc = psi_op
    for t in range(1, n + 1):
        u = setting.lab_unitaries[t - 1]
        if t < n:
            u = np.kron(np.eye(d), phase_gate(setting.thetas[t - 1])) @ u
        li, lo = lab_labels(t, d)
        ch = choi_of_unitary(u, [li, anc[t - 1]], [lo, anc[t]])
        acc = link_product(acc, ch)
    m = setting.outcome
    proj = np.zeros((2, 2), dtype=np.complex128)
    proj[m, m] = 1.0
    acc = link_product(acc, LabeledOperator((anc[n],), proj))
    sid = f"anc(n={n},m={m})"
    return ProbeElement(sid, str(m), canonicalize(acc),
                        meta={"thetas": list(setting.thetas), "outcome": m})


def phase_filter(values: dict[float, LabeledOperator]) -> LabeledOperator:
    """Four-point combination (T(0) - T(pi) - i T(pi/2) + i T(-pi/2)) / 4,
    extracting the e^{i theta} Fourier component of a phase-indexed family."""
    def lookup(theta):
        for key, op in values.items():
            if abs(key - theta) < 1e-9:
                return op
        raise MissingSample(f"no sample at theta = {theta}")

    t0, tpi = lookup(0.0), lookup(np.pi)
    tp, tm = lookup(np.pi / 2), lookup(-np.pi / 2)
    sig = t0.labels
    for op in (tpi, tp, tm):
        if op.keys != t0.keys:
            raise MissingSample("phase samples have inconsistent label signatures")
    out = (t0.mat - tpi.mat - 1j * tp.mat + 1j * tm.mat) / 4
    return LabeledOperator(sig, out)


# ---------------------------------------------------------------------------
# Weyl-block ancilla families
# ---------------------------------------------------------------------------

def weyl_block_spec(d: int, position: str, mu: int, nu: int) -> BlockUnitarySpec:
    """Per-lab block choice: K00 = sigma_nu / sqrt2 everywhere; the free
    unitary targeted by the filter is W = sigma_mu for first/middle labs and
    V = sigma_mu for the last lab."""
    basis = weyl_basis(d, Normalization.WEYL_UNITARY)
    k00 = basis.matrix(nu) / np.sqrt(2)
    eye = np.eye(d, dtype=np.complex128)
    if position in ("first", "middle"):
        return BlockUnitarySpec(k00=k00, v=eye, w=basis.matrix(mu))
    if position == "last":
        return BlockUnitarySpec(k00=k00, v=basis.matrix(mu), w=eye)
    raise InvalidSetting(f"unknown lab position {position!r}")


def weyl_lab_unitaries(d: int, pairs) -> list[np.ndarray]:
    """Joint unitaries for one Weyl-index setting; pairs = [(mu, nu)] per lab."""
    n = len(pairs)
    out = []
    for t, (mu, nu) in enumerate(pairs, start=1):
        position = "first" if t == 1 else ("last" if t == n else "middle")
        out.append(block_unitary(weyl_block_spec(d, position, mu, nu)))
    return out


def weyl_isolated_term(d: int, pairs) -> LabeledOperator:
    """Tensor-product term the nested phase filters isolate, built directly
    from the ancilla blocks of the same lab unitaries."""
    n = len(pairs)
    us = weyl_lab_unitaries(d, pairs)
    mats, labels = [], []
    for t, u in enumerate(us, start=1):
        if t == 1:
            ket, bra = ancilla_block(u, 1, 0), ancilla_block(u, 0, 0)
        elif t == n:
            ket, bra = ancilla_block(u, 0, 1), ancilla_block(u, 0, 0)
        else:
            ket, bra = ancilla_block(u, 1, 1), ancilla_block(u, 0, 0)
        vk, vb = choi_link.vec_matrix(ket), choi_link.vec_matrix(bra)
        mats.append(np.outer(vk, vb.conj()))
        labels.extend(lab_labels(t, d))
    full = mats[0]
    for m in mats[1:]:
        full = np.kron(full, m)
    return LabeledOperator(tuple(labels), full)


def _decode_setting(index: int, n_labs: int, d: int) -> list[tuple[int, int]]:
    pairs = []
    base = d * d
    for _ in range(n_labs):
        index, rem = divmod(index, base * base)
        pairs.append((rem // base, rem % base))
    return list(reversed(pairs))


def weyl_ancilla_family(n_labs: int, d: int = 2, element_cap: int = 20000,
                        subsample_settings: int | None = None,
                        seed: int = 0) -> ProbeFamily:
    """Weyl-block qubit-ancilla family: one (mu, nu) pair per lab, the full
    four-point phase grid on every link, and both ancilla outcomes.

    Single-lab families have no phase links, where pure Weyl blocks span only
    d^2 directions; that case falls back to the measure-and-prepare circuit
    over the state-tomography grid, keeping the d^4 settings x 2 outcomes
    layout. Settings may be subsampled deterministically for large N; without
    a subsample, exceeding element_cap raises OutOfBudget.
    """
    if n_labs < 1 or d < 2:
        raise InvalidSetting("need n_labs >= 1 and d >= 2")
    if n_labs == 1:
        states = op_basis.tomography_state_vectors(d)
        elems = []
        for i, a in enumerate(states):
            for j, psi in enumerate(states):
                sid = f"wa:s{i * len(states) + j}"
                e0, e1 = measure_prepare_instrument(a, psi, setting_id=sid)
                meta = {"effect": i, "prep": j}
                elems.append(ProbeElement(e0.setting_id, e0.outcome, e0.choi, meta))
                elems.append(ProbeElement(e1.setting_id, e1.outcome, e1.choi, meta))
        return ProbeFamily(tuple(elems), Provenance.WEYL_ANCILLA)

    n_settings = (d * d) ** (2 * n_labs)
    theta_combos = list(itertools.product(THETA_GRID, repeat=n_labs - 1))
    per_setting = len(theta_combos) * 2
    if subsample_settings is not None:
        if subsample_settings > n_settings:
            raise InvalidSetting("subsample larger than the full setting grid")
        rng = np.random.default_rng(np.random.SeedSequence([seed, n_labs, d, 0x7E2]))
        chosen = sorted(rng.choice(n_settings, size=subsample_settings, replace=False).tolist())
    else:
        if n_settings * per_setting > element_cap:
            raise OutOfBudget(
                f"family would hold {n_settings * per_setting} elements "
                f"(cap {element_cap}); pass subsample_settings")
        chosen = list(range(n_settings))

    elems = []
    for s_idx in chosen:
        pairs = _decode_setting(s_idx, n_labs, d)
        us = weyl_lab_unitaries(d, pairs)
        for t_idx, thetas in enumerate(theta_combos):
            for m in (0, 1):
                setting = AncillaProbeSetting(KET0, tuple(us), thetas, outcome=m)
                probe = ancilla_superinstrument(setting)
                sid = f"wa:s{s_idx}:th{t_idx}"
                elems.append(ProbeElement(sid, str(m), probe.choi,
                                          meta={"pairs": [list(p) for p in pairs],
                                                "thetas": list(thetas), "outcome": m}))
    return ProbeFamily(tuple(elems), Provenance.WEYL_ANCILLA)


# ---------------------------------------------------------------------------
# Operator Schmidt rank across lab bipartitions
# ---------------------------------------------------------------------------

def operator_schmidt_rank(t, cut, tol: float = DEFAULT_TOL) -> int:
    """Rank of the probe reshaped across a bipartition of the labs.

    cut is the set of lab indices on one side; both sides must be nonempty.
    """
    op = t.choi if isinstance(t, ProbeElement) else t
    labs = sorted({l.lab for l in op.labels})
    cut = set(cut)
    if not cut or not cut.issubset(set(labs)) or cut == set(labs):
        raise BadCut(f"cut {sorted(cut)} is not a proper bipartition of labs {labs}")
    left = [l for l in op.labels if l.lab in cut]
    right = [l for l in op.labels if l.lab not in cut]
    arranged = permute_systems(op, left + right)
    dl = math.prod(l.dim for l in left)
    dr = math.prod(l.dim for l in right)
    blocks = arranged.mat.reshape(dl, dr, dl, dr).transpose(0, 2, 1, 3).reshape(dl * dl, dr * dr)
    s = np.linalg.svd(blocks, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > max(tol, 1e-12) * s[0]))
