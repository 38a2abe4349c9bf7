import json

import numpy as np
import pytest

from proctomo import serialize
from proctomo.errors import ParseError
from proctomo.probe_factory import weyl_ancilla_family
from proctomo.process_sim import (
    build_process,
    interior_only,
    preset_process,
    sample_shots,
)
from proctomo.tensor_core import LabeledOperator, Role, SpaceLabel


def test_operator_roundtrip_bit_identical(rng):
    labels = (SpaceLabel(1, Role.INPUT, 2), SpaceLabel(1, Role.OUTPUT, 2))
    op = LabeledOperator(labels, rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    data = json.loads(json.dumps(serialize.operator_to_json(op)))
    back = serialize.operator_from_json(data)
    assert back.labels == op.labels
    assert np.array_equal(back.mat, op.mat)


def test_family_roundtrip_qubit16(tmp_path, qubit16):
    path = tmp_path / "family.jsonl"
    serialize.save_family(qubit16, path)
    back = serialize.load_family(path)
    assert back.provenance == qubit16.provenance
    assert len(back) == len(qubit16)
    for a, b in zip(qubit16, back):
        assert a.setting_id == b.setting_id and a.outcome == b.outcome
        assert np.array_equal(a.choi.mat, b.choi.mat)


def test_family_roundtrip_weyl_n2(tmp_path, weyl_n2):
    path = tmp_path / "family.jsonl"
    serialize.save_family(weyl_n2, path)
    with open(path) as fh:
        n_lines = sum(1 for _ in fh)
    assert n_lines == 2048 + 1  # header + one element per line
    back = serialize.load_family(path)
    assert len(back) == 2048
    for a, b in zip(list(weyl_n2)[::97], list(back)[::97]):
        assert np.array_equal(a.choi.mat, b.choi.mat)


def test_family_truncated_file_reports_line(tmp_path, qubit16):
    text = serialize.family_to_jsonl(qubit16)
    lines = text.splitlines()
    lines[5] = lines[5][: len(lines[5]) // 2]  # cut a JSON line in half
    broken = "\n".join(lines[:6])
    with pytest.raises(ParseError) as err:
        serialize.family_from_jsonl(broken)
    assert err.value.line == 6


def test_records_roundtrip(qubit16):
    w = interior_only(build_process(preset_process("HaarEnv", 1, 2, seed=1)))
    for shots in (0, 500):
        records = sample_shots(w, qubit16, shots, seed=2)
        back = serialize.records_from_json(serialize.records_to_json(records))
        assert back == records


def test_records_csv_columns(qubit16):
    w = interior_only(build_process(preset_process("HaarEnv", 1, 2, seed=1)))
    records = sample_shots(w, qubit16, 100, seed=2)
    csv_text = serialize.records_to_csv(records)
    lines = csv_text.strip().splitlines()
    assert lines[0] == "setting_id,outcome,count,shots"
    assert len(lines) == len(records) + 1


def test_spec_roundtrip():
    spec = preset_process("HaarEnv", 2, 2, seed=5)
    back = serialize.spec_from_json(json.loads(json.dumps(serialize.spec_to_json(spec))))
    assert back.n_labs == spec.n_labs and back.d_env == spec.d_env
    for u1, u2 in zip(spec.unitaries, back.unitaries):
        assert np.array_equal(u1, u2)
    w1 = build_process(spec)
    w2 = build_process(back)
    assert np.array_equal(w1.mat, w2.mat)


def test_markov_spec_roundtrip():
    spec = preset_process("MarkovDepolarizing", 1, 2, p=0.25)
    back = serialize.spec_from_json(json.loads(json.dumps(serialize.spec_to_json(spec))))
    for c1, c2 in zip(spec.channels, back.channels):
        assert np.array_equal(c1, c2)


def test_manifests_qubit16(qubit16):
    manifests = serialize.family_manifests(qubit16)
    assert len(manifests) == 13
    by_setting = {m["setting"]: m for m in manifests}
    u_manifest = by_setting["U:H"]
    assert u_manifest["measure"] is None and len(u_manifest["labs"]) == 1
    mp_manifest = by_setting["MP:X"]
    assert mp_manifest["measure"] == "X on ancilla"
    assert mp_manifest["outcomes"] == ["+", "-"]


def test_manifests_weyl_ancilla():
    fam = weyl_ancilla_family(2, 2, subsample_settings=None)
    manifests = serialize.family_manifests(fam)
    assert len(manifests) == 1024
    m = manifests[0]
    assert m["ancilla_prep"] == "|0>" and m["measure"] == "Z on ancilla"
    assert len(m["labs"]) == 2 and len(m["phase_gates"]) == 1
    mat = serialize.pairs_to_matrix(m["labs"][0])
    assert np.max(np.abs(mat.conj().T @ mat - np.eye(4))) < 1e-10
