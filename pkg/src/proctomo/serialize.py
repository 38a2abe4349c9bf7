"""JSON / JSON-lines / CSV persistence shared by every module.

Complex matrices serialize as row-major arrays of [re, im] pairs together with
a labels header of {lab, role, dim} records. Floats go through repr, so a
parse -> serialize round trip is bit-identical.
"""

import csv
import io
import json

import numpy as np

from .choi_link import ChoiKind, ChoiOperator
from .errors import ParseError
from .probe_factory import ProbeElement, ProbeFamily, Provenance
from .process_sim import ExperimentRecord, ProcessSpec
from .tensor_core import LabeledOperator, Role, SpaceLabel


def matrix_to_pairs(mat: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.asarray(mat, dtype=complex)]


def pairs_to_matrix(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)


def labels_to_json(labels) -> list:
    return [{"lab": l.lab, "role": l.role.value, "dim": l.dim} for l in labels]


def labels_from_json(items) -> tuple[SpaceLabel, ...]:
    return tuple(SpaceLabel(int(d["lab"]), Role(d["role"]), int(d["dim"])) for d in items)


def operator_to_json(op: LabeledOperator) -> dict:
    return {"labels": labels_to_json(op.labels), "matrix": matrix_to_pairs(op.mat)}


def operator_from_json(data) -> LabeledOperator:
    return LabeledOperator(labels_from_json(data["labels"]), pairs_to_matrix(data["matrix"]))


def choi_to_json(choi: ChoiOperator) -> dict:
    data = operator_to_json(choi.op)
    data["kind"] = choi.kind.value
    return data


def choi_from_json(data) -> ChoiOperator:
    op = operator_from_json(data)
    return ChoiOperator(op, ChoiKind(data["kind"]))


# ---------------------------------------------------------------------------
# Probe families (JSON lines)
# ---------------------------------------------------------------------------

def element_to_json(e: ProbeElement) -> dict:
    out = {"setting": e.setting_id, "outcome": e.outcome}
    if e.meta:
        out["meta"] = e.meta
    out.update(operator_to_json(e.choi))
    return out


def element_from_json(data) -> ProbeElement:
    return ProbeElement(str(data["setting"]), str(data["outcome"]),
                        operator_from_json(data), dict(data.get("meta", {})))


def family_to_jsonl(family: ProbeFamily) -> str:
    lines = [json.dumps({"type": "probe_family", "provenance": family.provenance.value,
                         "count": len(family)})]
    lines.extend(json.dumps(element_to_json(e)) for e in family)
    return "\n".join(lines) + "\n"


def family_from_jsonl(text: str) -> ProbeFamily:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty probe family file", line=1)
    try:
        header = json.loads(lines[0])
        provenance = Provenance(header.get("provenance", "Custom"))
    except (json.JSONDecodeError, ValueError) as exc:
        raise ParseError(f"bad family header: {exc}", line=1) from exc
    elements = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            elements.append(element_from_json(json.loads(line)))
        except Exception as exc:
            raise ParseError(f"bad probe element: {exc}", line=i) from exc
    if "count" in header and header["count"] != len(elements):
        raise ParseError(f"expected {header['count']} elements, found {len(elements)}",
                         line=len(lines))
    return ProbeFamily(tuple(elements), provenance)


def save_family(family: ProbeFamily, path) -> None:
    with open(path, "w") as fh:
        fh.write(family_to_jsonl(family))


def load_family(path) -> ProbeFamily:
    with open(path) as fh:
        return family_from_jsonl(fh.read())


# ---------------------------------------------------------------------------
# Experiment records and process specs
# ---------------------------------------------------------------------------

def record_to_json(r: ExperimentRecord) -> dict:
    return {"setting_id": r.setting_id, "outcome": r.outcome,
            "probability": r.probability, "count": r.count,
            "shots_total": r.shots_total}


def record_from_json(d) -> ExperimentRecord:
    return ExperimentRecord(str(d["setting_id"]), str(d["outcome"]),
                            probability=d.get("probability"),
                            count=d.get("count"),
                            shots_total=int(d.get("shots_total", 0)))


def records_to_json(records) -> str:
    return json.dumps([record_to_json(r) for r in records], indent=2) + "\n"


def records_from_json(text: str):
    return [record_from_json(d) for d in json.loads(text)]


def records_to_csv(records) -> str:
    """Columns (setting_id, outcome, count, shots); exact-mode rows carry the
    probability in the count column with shots = 0."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["setting_id", "outcome", "count", "shots"])
    for r in records:
        value = r.probability if r.shots_total == 0 else r.count
        writer.writerow([r.setting_id, r.outcome, repr(value) if isinstance(value, float) else value,
                         r.shots_total])
    return buf.getvalue()


def spec_to_json(spec: ProcessSpec) -> dict:
    out = {"n_labs": spec.n_labs, "d_sys": spec.d_sys, "d_env": spec.d_env,
           "name": spec.name, "seed": spec.seed}
    if spec.channels is not None:
        out["channels"] = [matrix_to_pairs(c) for c in spec.channels]
    else:
        out["env_state"] = matrix_to_pairs(spec.env_state)
        out["unitaries"] = [matrix_to_pairs(u) for u in spec.unitaries]
    return out


def spec_from_json(data) -> ProcessSpec:
    if "channels" in data:
        return ProcessSpec(int(data["n_labs"]), int(data["d_sys"]), int(data["d_env"]),
                           channels=tuple(pairs_to_matrix(c) for c in data["channels"]),
                           name=data.get("name", "custom"), seed=data.get("seed"))
    return ProcessSpec(int(data["n_labs"]), int(data["d_sys"]), int(data["d_env"]),
                       env_state=pairs_to_matrix(data["env_state"]),
                       unitaries=tuple(pairs_to_matrix(u) for u in data["unitaries"]),
                       name=data.get("name", "custom"), seed=data.get("seed"))


# ---------------------------------------------------------------------------
# Circuit manifests
# ---------------------------------------------------------------------------

_SWAP2 = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]],
                  dtype=np.complex128)


def _setting_manifest(elements: list[ProbeElement], d: int) -> dict:
    """One circuit per setting: ancilla prep, joint lab unitaries, phase gates,
    and the final ancilla measurement. Native-gate decomposition is not done."""
    from . import probe_factory as pf
    from . import op_basis

    first = elements[0]
    meta = first.meta or {}
    kind = meta.get("kind")
    manifest = {"setting": first.setting_id,
                "outcomes": [e.outcome for e in elements]}
    if kind == "unitary":
        name = meta.get("name", "U")
        u = dict(pf.QUBIT16_UNITARIES)[name]
        manifest.update({"ancilla_prep": "|0>",
                         "labs": [matrix_to_pairs(np.kron(u, np.eye(2)))],
                         "phase_gates": [], "measure": None})
    elif kind == "measure_prepare":
        basis = meta.get("basis", "Z")
        manifest.update({"ancilla_prep": f"|{basis}+>",
                         "labs": [matrix_to_pairs(_SWAP2)],
                         "phase_gates": [], "measure": f"{basis} on ancilla"})
    elif "pairs" in meta:
        us = pf.weyl_lab_unitaries(d, [tuple(p) for p in meta["pairs"]])
        manifest.update({"ancilla_prep": "|0>",
                         "labs": [matrix_to_pairs(u) for u in us],
                         "phase_gates": list(meta.get("thetas", [])),
                         "measure": "Z on ancilla"})
    elif "effect" in meta and "prep" in meta:
        states = op_basis.tomography_state_vectors(d)
        u = pf.measure_prepare_joint_unitary(states[meta["effect"]], states[meta["prep"]])
        manifest.update({"ancilla_prep": "|0>",
                         "labs": [matrix_to_pairs(u)],
                         "phase_gates": [], "measure": "Z on ancilla"})
    else:
        manifest.update({"ancilla_prep": "|0>", "labs": [], "phase_gates": [],
                         "measure": "Z on ancilla"})
    return manifest


def family_manifests(family: ProbeFamily) -> list[dict]:
    d = family.elements[0].choi.labels[0].dim if len(family) else 2
    return [_setting_manifest(elems, d) for elems in family.settings().values()]
