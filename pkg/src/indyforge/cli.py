"""Command-line entry point.

Exit codes: 0 success, 1 validation or authorization failure (one JSON
finding per line on stderr), 2 I/O or network failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from . import __version__, deploykit, genesis, keymat, netsim, poolstate, roster
from .errors import GenesisFormatError, GenesisInvalid, IndyForgeError, NetworkError, RosterError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


class Failure(Exception):
    """Abort the current command with ``exit_code`` after printing ``findings``."""

    def __init__(self, exit_code: int, findings: list[dict[str, Any]]) -> None:
        super().__init__(findings)
        self.exit_code = exit_code
        self.findings = findings


def _finding(exc: IndyForgeError, **extra: Any) -> dict[str, Any]:
    out = exc.to_dict()
    out.update({k: v for k, v in extra.items() if v is not None})
    return out


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise Failure(EXIT_IO, [{"code": "IOError", "message": str(exc), "file": path}]) from None


def _write(path: Path, content: bytes) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(content)
    except OSError as exc:
        raise Failure(EXIT_IO, [{"code": "IOError", "message": str(exc), "file": str(path)}]) from None


def _emit(obj: Any) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _load_roster(trustees_path: str, stewards_path: str, strict: bool) -> roster.Roster:
    try:
        trustees = roster.parse_trustee_csv(_read(trustees_path), source=trustees_path)
        stewards = roster.parse_steward_csv(_read(stewards_path), source=stewards_path)
        return roster.validate_roster(trustees, stewards, strict=strict)
    except RosterError as exc:
        raise Failure(EXIT_INVALID, [_finding(exc)]) from None


def _load_pair(domain_path: str, pool_path: str) -> tuple[genesis.GenesisDoc, genesis.GenesisDoc]:
    findings = []
    docs = []
    for path, kind in ((domain_path, genesis.GenesisKind.DOMAIN), (pool_path, genesis.GenesisKind.POOL)):
        try:
            docs.append(genesis.parse_genesis(_read(path), kind))
        except GenesisFormatError as exc:
            findings.append(_finding(exc, file=path))
    if findings:
        raise Failure(EXIT_INVALID, findings)
    return docs[0], docs[1]


def _seed(text: str | None) -> tuple[bytes, bool]:
    if text is None:
        return keymat.random_seed(), True
    try:
        return keymat.parse_seed(text), False
    except keymat.SeedLength as exc:
        raise Failure(EXIT_INVALID, [_finding(exc)]) from None


def _print_secret_seed(seed: bytes) -> None:
    # the seed never goes into a report body; this line is the only place it appears
    sys.stdout.write(f"SECRET seed (hex, keep private): {seed.hex()}\n")


def cmd_keygen(args: argparse.Namespace) -> int:
    seed, generated = _seed(args.seed)
    ident = keymat.derive_signing_identity(seed)
    bls = keymat.derive_bls_identity(seed)
    _emit({"did": ident.did, "verkey": ident.verkey, "bls_key": bls.bls_key, "bls_pop": bls.bls_pop})
    if generated:
        _print_secret_seed(seed)
    return EXIT_OK


def cmd_init_node(args: argparse.Namespace) -> int:
    seed, generated = _seed(args.seed)
    try:
        report = deploykit.init_node_report(
            args.alias, args.node_ip, args.node_port, args.client_ip, args.client_port, seed
        )
    except IndyForgeError as exc:
        raise Failure(EXIT_INVALID, [_finding(exc)]) from None
    if args.out:
        _write(Path(args.out), report.to_json())
    sys.stdout.write(report.to_json().decode("utf-8"))
    if generated:
        _print_secret_seed(seed)
    return EXIT_OK


def cmd_genesis_build(args: argparse.Namespace) -> int:
    r = _load_roster(args.trustees, args.stewards, strict=not args.no_strict)
    out = Path(args.out_dir)
    domain = genesis.serialize_genesis(genesis.build_domain_genesis(r))
    pool = genesis.serialize_genesis(genesis.build_pool_genesis(r))
    _write(out / genesis.DOMAIN_FILE, domain)
    _write(out / genesis.POOL_FILE, pool)
    _emit({"domain_txns": len(r.trustees) + len(r.stewards), "pool_txns": len(r.validators), "out_dir": str(out)})
    return EXIT_OK


def _check_pair(domain: genesis.GenesisDoc, pool: genesis.GenesisDoc, strict: bool) -> None:
    report = genesis.verify_genesis_pair(domain, pool, strict=strict)
    if not report.ok:
        raise Failure(EXIT_INVALID, [v.to_dict() for v in report.violations])


def cmd_genesis_verify(args: argparse.Namespace) -> int:
    domain, pool = _load_pair(args.domain, args.pool)
    _check_pair(domain, pool, strict=not args.no_strict)
    _emit({"ok": True, "domain_txns": len(domain), "pool_txns": len(pool)})
    return EXIT_OK


def cmd_pool_simulate(args: argparse.Namespace) -> int:
    domain, pool = _load_pair(args.domain, args.pool)
    strict = not args.no_strict
    _check_pair(domain, pool, strict)
    try:
        actions = netsim.load_scenario(_read(args.scenario))
    except ValueError as exc:
        raise Failure(EXIT_INVALID, [{"code": "BadScenario", "message": str(exc), "file": args.scenario}]) from None
    sim = netsim.spawn_pool(domain, pool, network_name=args.network, strict=strict, transport=args.transport)
    with sim:
        try:
            reports = netsim.run_scenario(sim, actions)
        except (IndyForgeError, KeyError, TypeError, ValueError) as exc:
            finding = _finding(exc) if isinstance(exc, IndyForgeError) else {"code": "BadScenario", "message": str(exc)}
            raise Failure(EXIT_INVALID, [finding]) from None
        final = sim.report()
        _emit({"steps": [r.to_dict() for r in reports], "final": final.to_dict(), "ordering_log": len(sim.ordering_log)})
    rejected = [r.error for r in reports if r.error is not None]
    if rejected:
        for error in rejected:
            sys.stderr.write(json.dumps(error.to_dict(), sort_keys=True) + "\n")
        return EXIT_INVALID
    return EXIT_OK


def cmd_node_add(args: argparse.Namespace) -> int:
    domain, pool = _load_pair(args.domain, args.pool)
    strict = not args.no_strict
    _check_pair(domain, pool, strict)
    try:
        steward, validator = roster.parse_steward_row(args.steward_csv_row)
        state = poolstate.bootstrap_state(args.network, domain, pool, strict=strict)
        after = poolstate.add_node_workflow(state, args.trustee_did, steward, validator)
    except IndyForgeError as exc:
        raise Failure(EXIT_INVALID, [_finding(exc)]) from None
    submissions = poolstate.node_addition(args.trustee_did, steward, validator)
    _emit(
        {
            "submissions": [s.to_json() for s in submissions],
            "participants": len(after.participants),
            "validators": len(after.validators),
            "ledger": len(after.ledger),
        }
    )
    return EXIT_OK


def cmd_deploy_render(args: argparse.Namespace) -> int:
    try:
        cfg = deploykit.NetworkConfig(args.network)
    except IndyForgeError as exc:
        raise Failure(EXIT_INVALID, [_finding(exc)]) from None
    r = _load_roster(args.trustees, args.stewards, strict=not args.no_strict)
    domain = genesis.serialize_genesis(genesis.build_domain_genesis(r))
    pool = genesis.serialize_genesis(genesis.build_pool_genesis(r))
    plan = deploykit.render_deploy_plan(r, cfg, domain, pool, image=args.image)
    try:
        written = plan.write(args.out_dir)
    except OSError as exc:
        raise Failure(EXIT_IO, [{"code": "IOError", "message": str(exc)}]) from None
    _emit({"files": [str(p) for p in written], "port_bindings": plan.port_bindings})
    return EXIT_OK


def cmd_fetch(args: argparse.Namespace) -> int:
    try:
        body = deploykit.fetch_genesis(args.url, kind=args.kind)
    except NetworkError as exc:
        raise Failure(EXIT_IO, [_finding(exc)]) from None
    except GenesisInvalid as exc:
        raise Failure(EXIT_INVALID, [_finding(exc)]) from None
    _write(Path(args.out), body)
    _emit({"url": args.url, "out": args.out, "bytes": len(body)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="indyforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="derive a DID, verkey and BLS key from a seed")
    p.add_argument("--seed", help="64 hex digits, 32 ASCII characters, or base58; random if omitted")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("init-node", help="generate a validator's public key report")
    p.add_argument("--alias", required=True)
    p.add_argument("--node-ip", required=True)
    p.add_argument("--node-port", required=True)
    p.add_argument("--client-ip", required=True)
    p.add_argument("--client-port", required=True)
    p.add_argument("--seed")
    p.add_argument("--out", help="also write the report JSON here")
    p.set_defaults(func=cmd_init_node)

    g = sub.add_parser("genesis", help="build or verify genesis files").add_subparsers(dest="action", required=True)
    p = g.add_parser("build")
    p.add_argument("--trustees", required=True)
    p.add_argument("--stewards", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-strict", action="store_true", help="skip the production trustee/steward counts")
    p.set_defaults(func=cmd_genesis_build)
    p = g.add_parser("verify")
    p.add_argument("--domain", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--no-strict", action="store_true")
    p.set_defaults(func=cmd_genesis_verify)

    pl = sub.add_parser("pool", help="simulate a validator pool").add_subparsers(dest="action", required=True)
    p = pl.add_parser("simulate")
    p.add_argument("--domain", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--transport", choices=["inproc", "tcp"], default="inproc")
    p.add_argument("--network", default="sandbox")
    p.add_argument("--no-strict", action="store_true")
    p.set_defaults(func=cmd_pool_simulate)

    n = sub.add_parser("node", help="node onboarding").add_subparsers(dest="action", required=True)
    p = n.add_parser("add")
    p.add_argument("--domain", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--steward-csv-row", required=True, help="one headerless row in steward sheet layout")
    p.add_argument("--trustee-did", required=True)
    p.add_argument("--network", default="sandbox")
    p.add_argument("--no-strict", action="store_true")
    p.set_defaults(func=cmd_node_add)

    d = sub.add_parser("deploy", help="render deployment artifacts").add_subparsers(dest="action", required=True)
    p = d.add_parser("render")
    p.add_argument("--network", required=True)
    p.add_argument("--trustees", required=True)
    p.add_argument("--stewards", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--image", default=deploykit.DEFAULT_IMAGE)
    p.add_argument("--no-strict", action="store_true")
    p.set_defaults(func=cmd_deploy_render)

    p = sub.add_parser("fetch", help="download and check a published genesis file")
    p.add_argument("--url", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=[k.value for k in genesis.GenesisKind])
    p.set_defaults(func=cmd_fetch)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Failure as exc:
        for finding in exc.findings:
            sys.stderr.write(json.dumps(finding, sort_keys=True) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
