"""Ground-truth process matrices from system-environment dilations, the
generalized Born rule, and exact or finite-shot synthetic data.

A full process matrix for N labs lives on the wires
(0,O), (1,I), (1,O), ..., (N,O), (N+1,I): lab 0's output models the
preparation wire and lab N+1's input the final measurement wire. Contracting
those two boundary wires with a fixed preparation and a trace yields the
interior-only matrix on the per-lab (I, O) factors that the probe families
address.
"""

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import choi_link
from .choi_link import CombDirection, CombReport, choi_of_unitary, link_product, validate_comb
from .errors import (
    DimMismatch,
    InvalidSpec,
    NegativeProbability,
    NotNormalizedSetting,
    UnknownPreset,
)
from .op_basis import haar_unitary
from .probe_factory import ProbeElement, ProbeFamily
from .tensor_core import (
    DEFAULT_TOL,
    LabeledOperator,
    Role,
    SpaceLabel,
    canonicalize,
    partial_trace,
)

NEGATIVITY_TOL = 1e-8

PRESET_NAMES = ("IdentityWire", "MarkovDepolarizing", "ClassicalMemory", "HaarEnv")


def derive_rng(seed: int, *purpose) -> np.random.Generator:
    """Generator derived from a root seed and a tuple of purpose tokens.

    String tokens are hashed; the derivation is stable across runs and
    independent of evaluation order.
    """
    words = [int(seed) & 0xFFFFFFFF]
    for p in purpose:
        words.append(zlib.crc32(str(p).encode()) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(words))


def worker_count(requested: int | None = None) -> int:
    if requested is not None and requested > 0:
        return int(requested)
    env = os.environ.get("PROCTOMO_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _thread_map(fn, items, threads):
    n = worker_count(threads)
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Specifications and presets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProcessSpec:
    n_labs: int
    d_sys: int
    d_env: int = 1
    env_state: np.ndarray | None = None
    unitaries: tuple[np.ndarray, ...] | None = None
    channels: tuple[np.ndarray, ...] | None = None
    name: str = "custom"
    seed: int | None = None

    def __post_init__(self):
        if self.n_labs < 1 or self.d_sys < 2 or self.d_env < 1:
            raise InvalidSpec("need n_labs >= 1, d_sys >= 2, d_env >= 1")
        if (self.unitaries is None) == (self.channels is None):
            raise InvalidSpec("exactly one of unitaries/channels must be given")
        n_steps = self.n_labs + 1
        if self.channels is not None:
            chans = tuple(np.asarray(c, dtype=np.complex128) for c in self.channels)
            if len(chans) != n_steps:
                raise InvalidSpec(f"need {n_steps} step channels, got {len(chans)}")
            side = self.d_sys ** 2
            if any(c.shape != (side, side) for c in chans):
                raise InvalidSpec("step channels must be d_sys^2-dimensional Chois")
            object.__setattr__(self, "channels", chans)
            return
        us = tuple(np.asarray(u, dtype=np.complex128) for u in self.unitaries)
        if len(us) != n_steps:
            raise InvalidSpec(f"need {n_steps} joint unitaries, got {len(us)}")
        dj = self.d_sys * self.d_env
        for u in us:
            if u.shape != (dj, dj):
                raise InvalidSpec(f"joint unitaries must be {dj}x{dj}")
            if np.max(np.abs(u.conj().T @ u - np.eye(dj))) > 1e-9:
                raise InvalidSpec("joint unitaries must be unitary within tolerance")
        env = self.env_state
        if self.d_env == 1:
            env = np.array([[1.0 + 0j]])
        elif env is None:
            raise InvalidSpec("env_state required when d_env > 1")
        else:
            env = np.asarray(env, dtype=np.complex128)
            if env.shape != (self.d_env, self.d_env):
                raise InvalidSpec("env_state has the wrong shape")
            if abs(np.trace(env) - 1.0) > 1e-9 or np.linalg.eigvalsh((env + env.conj().T) / 2)[0] < -1e-9:
                raise InvalidSpec("env_state must be a unit-trace PSD matrix")
        object.__setattr__(self, "env_state", env)
        object.__setattr__(self, "unitaries", us)


def _depolarizing_choi(d: int, p: float) -> np.ndarray:
    return (1 - p) * choi_link.bell_matrix(d) + p * np.eye(d * d, dtype=np.complex128) / d


def preset_process(name: str, n_labs: int, d_sys: int, seed: int = 0,
                   p: float = 0.5, d_env: int = 2) -> ProcessSpec:
    """Deterministic fixture specs; identical (name, args, seed) give an
    identical spec."""
    steps = n_labs + 1
    if name == "IdentityWire":
        return ProcessSpec(n_labs, d_sys, d_env=1,
                           unitaries=tuple([np.eye(d_sys)] * steps),
                           name=name, seed=seed)
    if name == "MarkovDepolarizing":
        if not 0.0 <= p <= 1.0:
            raise InvalidSpec(f"depolarizing weight must be in [0, 1], got {p}")
        return ProcessSpec(n_labs, d_sys, d_env=1,
                           channels=tuple([_depolarizing_choi(d_sys, p)] * steps),
                           name=f"{name}(p={p})", seed=seed)
    if name == "ClassicalMemory":
        omega = np.exp(2j * np.pi / d_sys)
        fourier = np.array([[omega ** (j * k) for k in range(d_sys)]
                            for j in range(d_sys)]) / np.sqrt(d_sys)
        branch = {0: np.eye(d_sys, dtype=np.complex128), 1: fourier}
        u = np.zeros((2 * d_sys, 2 * d_sys), dtype=np.complex128)
        for e in (0, 1):
            ee = np.zeros((2, 2))
            ee[e, e] = 1.0
            u += np.kron(branch[e], ee)
        env = np.diag([0.5, 0.5]).astype(np.complex128)
        return ProcessSpec(n_labs, d_sys, d_env=2, env_state=env,
                           unitaries=tuple([u] * steps), name=name, seed=seed)
    if name == "HaarEnv":
        if not 1 <= d_env <= 4:
            raise InvalidSpec("HaarEnv supports d_env in 1..4")
        rng = derive_rng(seed, "preset", "HaarEnv", n_labs, d_sys, d_env)
        dj = d_sys * d_env
        env = np.zeros((d_env, d_env), dtype=np.complex128)
        env[0, 0] = 1.0
        return ProcessSpec(n_labs, d_sys, d_env=d_env,
                           env_state=env if d_env > 1 else None,
                           unitaries=tuple(haar_unitary(dj, rng) for _ in range(steps)),
                           name=f"{name}(d_env={d_env})", seed=seed)
    raise UnknownPreset(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


# ---------------------------------------------------------------------------
# Building and contracting process matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProcessMatrix:
    op: LabeledOperator
    n_labs: int
    d_sys: int
    interior: bool = False
    comb_report: CombReport | None = None
    meta: dict = field(default_factory=dict)

    @property
    def mat(self) -> np.ndarray:
        return self.op.mat


def _sys_out(t: int, d: int) -> SpaceLabel:
    return SpaceLabel(t, Role.OUTPUT, d)


def _sys_in(t: int, d: int) -> SpaceLabel:
    return SpaceLabel(t, Role.INPUT, d)


def build_process(spec: ProcessSpec, tol: float = DEFAULT_TOL) -> ProcessMatrix:
    """Link the environment state through the joint unitaries and trace the
    final environment; returns the full process matrix with boundary wires."""
    d = spec.d_sys
    n = spec.n_labs
    if spec.channels is not None:
        acc = None
        for t, c in enumerate(spec.channels):
            lbls = (_sys_out(t, d), _sys_in(t + 1, d))
            step = LabeledOperator(lbls, c)
            acc = step if acc is None else link_product(acc, step)
        w = canonicalize(acc)
    elif spec.d_env == 1:
        acc = None
        for t, u in enumerate(spec.unitaries):
            step = choi_of_unitary(u, [_sys_out(t, d)], [_sys_in(t + 1, d)]).op
            acc = step if acc is None else link_product(acc, step)
        w = canonicalize(acc)
    else:
        de = spec.d_env
        env = [SpaceLabel(t, Role.ENV, de) for t in range(n + 2)]
        acc = LabeledOperator((env[0],), spec.env_state)
        for t, u in enumerate(spec.unitaries):
            step = choi_of_unitary(u, [_sys_out(t, d), env[t]],
                                   [_sys_in(t + 1, d), env[t + 1]]).op
            acc = link_product(acc, step)
        acc = partial_trace(acc, [env[n + 1]])
        w = canonicalize(acc)
    report = validate_comb(w, direction=CombDirection.PROCESS, tol=tol)
    if not report.passed:
        raise InvalidSpec(
            f"constructed process fails comb validation "
            f"(max violation {report.max_violation:.3e})")
    return ProcessMatrix(w, n_labs=n, d_sys=d, interior=False, comb_report=report,
                         meta={"name": spec.name, "seed": spec.seed})


def interior_only(w: ProcessMatrix, prep: np.ndarray | None = None,
                  tol: float = DEFAULT_TOL) -> ProcessMatrix:
    """Contract the preparation wire with a fixed state and trace the final
    measurement wire, leaving the matrix on the interior (I, O) factors."""
    if w.interior:
        raise InvalidSpec("process matrix is already interior-only")
    d = w.d_sys
    if prep is None:
        prep = np.zeros((d, d), dtype=np.complex128)
        prep[0, 0] = 1.0
    prep = np.asarray(prep, dtype=np.complex128)
    if prep.shape != (d, d) or abs(np.trace(prep) - 1.0) > 1e-9:
        raise InvalidSpec("prep must be a unit-trace d_sys state")
    prep_op = LabeledOperator((_sys_out(0, d),), prep)
    contracted = link_product(prep_op, w.op)
    contracted = partial_trace(contracted, [_sys_in(w.n_labs + 1, d)])
    out = canonicalize(contracted)
    report = validate_comb(out, direction=CombDirection.PROCESS, tol=tol)
    meta = dict(w.meta)
    meta["prep"] = [[float(x.real), float(x.imag)] for x in prep.reshape(-1)]
    return ProcessMatrix(out, n_labs=w.n_labs, d_sys=d, interior=True,
                         comb_report=report, meta=meta)


# ---------------------------------------------------------------------------
# Born rule and sampling
# ---------------------------------------------------------------------------

def born_probability(w: ProcessMatrix | LabeledOperator, probe,
                     tol: float = NEGATIVITY_TOL) -> float:
    """p = Tr[W^T T] after permuting both operands to canonical label order."""
    wop = w.op if isinstance(w, ProcessMatrix) else w
    top = probe.choi if isinstance(probe, ProbeElement) else probe
    wop, top = canonicalize(wop), canonicalize(top)
    if wop.keys != top.keys:
        raise DimMismatch(f"process labels {wop.keys} do not match probe labels {top.keys}")
    val = complex(np.sum(wop.mat * top.mat))
    if abs(val.imag) > tol:
        raise NegativeProbability(f"Born value has imaginary part {val.imag:.3e}")
    p = val.real
    if p < -tol:
        raise NegativeProbability(f"Born probability {p:.3e} below -{tol}")
    return max(p, 0.0)


def born_probabilities(w, family: ProbeFamily, threads: int | None = None) -> list[float]:
    return _thread_map(lambda e: born_probability(w, e), list(family), threads)


@dataclass(frozen=True)
class ExperimentRecord:
    setting_id: str
    outcome: str
    probability: float | None = None
    count: int | None = None
    shots_total: int = 0

    def frequency(self) -> float:
        if self.shots_total == 0:
            return float(self.probability)
        return self.count / self.shots_total


def sample_shots(w, family: ProbeFamily, shots: int, seed: int = 0,
                 threads: int | None = None) -> list[ExperimentRecord]:
    """Multinomial draws per setting with per-setting derived seeds.

    shots = 0 emits the exact probabilities instead. Records follow the family
    enumeration order; identical (family, shots, seed) give identical records.
    """
    probs = born_probabilities(w, family, threads)
    by_setting: dict[str, list[tuple[ProbeElement, float]]] = {}
    order: list[str] = []
    for e, p in zip(family, probs):
        if e.setting_id not in by_setting:
            order.append(e.setting_id)
        by_setting.setdefault(e.setting_id, []).append((e, p))
    records: dict[tuple[str, str], ExperimentRecord] = {}
    for sid in order:
        pairs = by_setting[sid]
        total = sum(p for _, p in pairs)
        if abs(total - 1.0) > NEGATIVITY_TOL:
            raise NotNormalizedSetting(
                f"setting {sid!r} outcome probabilities sum to {total:.10f}")
        if shots == 0:
            for e, p in pairs:
                records[e.record_key] = ExperimentRecord(sid, e.outcome, probability=p)
            continue
        rng = derive_rng(seed, "shots", sid)
        pvec = np.array([max(p, 0.0) for _, p in pairs])
        pvec = pvec / pvec.sum()
        counts = rng.multinomial(shots, pvec)
        for (e, _), c in zip(pairs, counts):
            records[e.record_key] = ExperimentRecord(sid, e.outcome, count=int(c),
                                                     shots_total=shots)
    return [records[e.record_key] for e in family]
