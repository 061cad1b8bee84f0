"""Python bindings for the qkdrelay simulator."""

import json as _json

from . import _core

from ._core import (
    KeyRegister,
    QkdRelayError,
    eta_direct_kem,
    eta_kem_then_aes,
    eta_table,
    final_rate,
    format_percent,
    paris_topology,
    topology_nodes,
)

__all__ = [
    "KeyRegister",
    "QkdRelayError",
    "audit",
    "eta_direct_kem",
    "eta_kem_then_aes",
    "eta_table",
    "final_rate",
    "format_percent",
    "paris_topology",
    "run_continuous",
    "run_session",
    "topology_nodes",
]


def run_session(variant="pqc-secured", l=256, seed=1, kem="KEM-512", suite="mock", max_wait_s=3600.0, topology=None):
    """Run one relay session, waiting for link key if needed.

    Returns a dict with the session report plus ``transcript`` (JSONL text),
    ``alice_key`` and ``bob_key`` (bytes).
    """
    report, transcript, alice, bob = _core._run_session(variant, l, seed, kem, suite, max_wait_s, topology)
    out = _json.loads(report)
    out.update(transcript=transcript, alice_key=alice, bob_key=bob)
    return out


def run_continuous(variant="pqc-secured", duration_s=3600.0, seed=1, kem="KEM-512", suite="mock",
                   l_target=2560, periodic=None, topology=None):
    """Run the network for ``duration_s`` seconds. Returns ``(summary, telemetry_csv)``."""
    summary, csv = _core._run_continuous(variant, duration_s, seed, kem, suite, l_target, periodic, topology)
    return _json.loads(summary), csv


def audit(transcript, as_="charlie", node=None):
    """Adversary views and reconstructions for every session in a JSONL transcript."""
    return [_json.loads(line) for line in _core._audit(transcript, as_, node)]
