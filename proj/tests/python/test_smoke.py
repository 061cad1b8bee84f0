import pytest

import qkdrelay


def test_eta_values():
    assert qkdrelay.format_percent(qkdrelay.eta_direct_kem("KEM-512")) == "4.17%"
    assert qkdrelay.format_percent(qkdrelay.eta_direct_kem("KEM-768")) == "2.94%"
    assert qkdrelay.format_percent(qkdrelay.eta_direct_kem("KEM-1024")) == "2.04%"
    assert qkdrelay.eta_kem_then_aes(2560) == 1.0
    assert qkdrelay.eta_kem_then_aes(300) == 300 / 384
    assert len(qkdrelay.eta_table()) == 6


def test_key_register():
    a = qkdrelay.KeyRegister.from_bits("1011")
    b = qkdrelay.KeyRegister.from_bits("0110")
    assert (a ^ b).bits() == "1101"
    assert (a ^ b ^ b) == a
    assert a.truncate(2).bits() == "10"
    assert len(a.pad(128)) == 128
    assert a.pad(128).unpad(4, 128) == a
    with pytest.raises(qkdrelay.QkdRelayError, match="LengthMismatch"):
        a ^ qkdrelay.KeyRegister(5)


def test_session_keys_agree():
    for variant in ("standard", "pqc-secured", "direct-kem"):
        r = qkdrelay.run_session(variant=variant, l=512, seed=4)
        assert r["keys_match"]
        assert r["alice_key"] == r["bob_key"]
        assert len(r["alice_key"]) == 64


def test_audit_distinguishes_variants():
    std = qkdrelay.run_session(variant="standard", l=256, seed=2)
    pqc = qkdrelay.run_session(variant="pqc-secured", l=256, seed=2)
    (s,) = qkdrelay.audit(std["transcript"])
    (p,) = qkdrelay.audit(pqc["transcript"])
    assert s["reconstruction"]["is_final_key"]
    assert not p["reconstruction"]["is_final_key"]


def test_continuous_run():
    summary, csv = qkdrelay.run_continuous(duration_s=600, seed=3)
    assert summary["completed"] > 0
    assert summary["single_use_holds"]
    assert csv.startswith("timestamp_s,link_id,skr_bps,qber,visibility\n")
    again, csv2 = qkdrelay.run_continuous(duration_s=600, seed=3)
    assert csv == csv2


def test_topology_errors():
    assert qkdrelay.topology_nodes(qkdrelay.paris_topology()) == ["A", "C", "B"]
    with pytest.raises(qkdrelay.QkdRelayError, match="ParseError"):
        qkdrelay.topology_nodes("nodes:\n  - {id: A, colour: red}\n")
