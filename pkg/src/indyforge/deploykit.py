"""Render deployment artifacts for a validator pool and fetch published genesis files.

Nothing here touches a live host or a container engine. Every render is a
pure function of its inputs and returns bytes, so outputs can be diffed,
committed, or handed to whatever executor the operator prefers.
"""

from __future__ import annotations

import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Any

import yaml

from . import keymat
from .errors import BadEndpoint, BadNetworkName, GenesisFormatError, GenesisInvalid, NetworkError
from .genesis import DOMAIN_FILE, POOL_FILE, GenesisKind, infer_kind, parse_genesis
from .roster import Roster, check_endpoints

DEFAULT_DATA_ROOT = "var/lib/indy"
DATA_ROOT_ENV = "INDYFORGE_DATA_ROOT"
CONTAINER_NODE_PORT = 9701
CONTAINER_CLIENT_PORT = 9702
HOST_PORT_BASE = 9700
DEFAULT_IMAGE = "indy-node:latest"

_NETWORK_NAME = re.compile(r"[A-Za-z0-9_]+")
_SERVICE_CHARS = re.compile(r"[^a-z0-9_.-]+")


@dataclass(frozen=True)
class NetworkConfig:
    network_name: str
    genesis_domain_url: str | None = None
    genesis_pool_url: str | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.network_name, str) or not _NETWORK_NAME.fullmatch(self.network_name):
            raise BadNetworkName(f"network name must match [A-Za-z0-9_]+, got {self.network_name!r}")


@dataclass
class DeployPlan:
    files: dict[str, bytes] = field(default_factory=dict)
    port_bindings: dict[str, tuple[int, int]] = field(default_factory=dict)

    def merge(self, other: DeployPlan) -> DeployPlan:
        clash = set(self.files) & set(other.files)
        if clash:
            raise ValueError(f"plans both write {sorted(clash)}")
        return DeployPlan({**self.files, **other.files}, {**self.port_bindings, **other.port_bindings})

    def write(self, out_dir: str | os.PathLike[str]) -> list[Path]:
        root = Path(out_dir)
        written = []
        for rel, content in sorted(self.files.items()):
            path = root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(content)
            written.append(path)
        return written


def data_root(default: str = DEFAULT_DATA_ROOT) -> str:
    return os.environ.get(DATA_ROOT_ENV, default)


def render_node_config(cfg: NetworkConfig) -> bytes:
    """The node's ``indy_config.py`` with ``NETWORK_NAME`` set to the pool's name."""
    lines = [
        "# Generated by indyforge. Node keys are not stored here.",
        f"NETWORK_NAME = '{cfg.network_name}'",
        "",
        "LEDGER_DIR = '/var/lib/indy'",
        "LOG_DIR = '/var/log/indy'",
        "KEYS_DIR = '/var/lib/indy'",
        "GENESIS_DIR = '/var/lib/indy'",
        "BACKUP_DIR = '/var/lib/indy/backup'",
        "PLUGINS_DIR = '/var/lib/indy/plugins'",
        "NODE_INFO_DIR = '/var/lib/indy'",
        "",
        "enableStdOutLogging = False",
        "logRotationBackupCount = 10",
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")


def render_network_layout(
    cfg: NetworkConfig, domain_bytes: bytes, pool_bytes: bytes, root: str | None = None
) -> DeployPlan:
    """Place both genesis files in ``<root>/<network_name>/``, unchanged."""
    for content, kind in ((domain_bytes, GenesisKind.DOMAIN), (pool_bytes, GenesisKind.POOL)):
        try:
            parse_genesis(content, kind)
        except GenesisFormatError as exc:
            raise GenesisInvalid(f"{kind.file_name}: {exc}", cause=exc) from exc
    base = PurePosixPath(root if root is not None else data_root()) / cfg.network_name
    return DeployPlan(
        files={
            str(base / DOMAIN_FILE): bytes(domain_bytes),
            str(base / POOL_FILE): bytes(pool_bytes),
        }
    )


def host_ports(index: int) -> tuple[int, int]:
    """Host (node, client) ports for the validator at 1-based roster position ``index``."""
    return HOST_PORT_BASE + 2 * index - 1, HOST_PORT_BASE + 2 * index


def service_names(aliases: list[str]) -> list[str]:
    names: list[str] = []
    for alias in aliases:
        base = _SERVICE_CHARS.sub("-", alias.lower()).strip("-.") or "node"
        name, n = base, 2
        while name in names:
            name, n = f"{base}-{n}", n + 1
        names.append(name)
    return names


def _compose_doc(roster: Roster, cfg: NetworkConfig, image: str, root: str) -> dict[str, Any]:
    network_dir = str(PurePosixPath(root) / cfg.network_name)
    if not PurePosixPath(root).is_absolute():
        network_dir = f"./{network_dir}"
    services = {}
    aliases = [v.alias for v in roster.validators]
    for index, (validator, name) in enumerate(zip(roster.validators, service_names(aliases)), start=1):
        node_host, client_host = host_ports(index)
        services[name] = {
            "image": image,
            "container_name": name,
            "environment": {
                "NETWORK_NAME": cfg.network_name,
                "NODE_NAME": validator.alias,
                "NODE_IP": "0.0.0.0",
                "NODE_PORT": str(CONTAINER_NODE_PORT),
                "CLIENT_IP": "0.0.0.0",
                "CLIENT_PORT": str(CONTAINER_CLIENT_PORT),
            },
            "ports": [
                f"{node_host}:{CONTAINER_NODE_PORT}",
                f"{client_host}:{CONTAINER_CLIENT_PORT}",
            ],
            "volumes": [
                f"./nodes/{name}/indy_config.py:/etc/indy/indy_config.py:ro",
                f"{network_dir}:/var/lib/indy/{cfg.network_name}",
                f"./nodes/{name}/keys:/var/lib/indy/{cfg.network_name}/keys",
            ],
            "restart": "unless-stopped",
        }
    return {"name": cfg.network_name.lower(), "services": services}


def render_compose(
    roster: Roster, cfg: NetworkConfig, image: str = DEFAULT_IMAGE, root: str | None = None
) -> bytes:
    """docker-compose descriptor with one service per validator, in roster order.

    Inside each container the node listens on 9701/9702; the k-th validator is
    published on host ports 9700+2k-1 and 9700+2k.
    """
    doc = _compose_doc(roster, cfg, image, root if root is not None else data_root())
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=False).encode("utf-8")


def render_deploy_plan(
    roster: Roster,
    cfg: NetworkConfig,
    domain_bytes: bytes,
    pool_bytes: bytes,
    image: str = DEFAULT_IMAGE,
    root: str | None = None,
) -> DeployPlan:
    """Everything needed to bring the pool up: configs, genesis layout, compose file."""
    root = root if root is not None else data_root()
    plan = render_network_layout(cfg, domain_bytes, pool_bytes, root)
    config = render_node_config(cfg)
    names = service_names([v.alias for v in roster.validators])
    node_files = DeployPlan()
    for index, (validator, name) in enumerate(zip(roster.validators, names), start=1):
        node_files.files[f"nodes/{name}/indy_config.py"] = config
        node_files.port_bindings[validator.alias] = host_ports(index)
    node_files.files["docker-compose.yml"] = render_compose(roster, cfg, image, root)
    return plan.merge(node_files)


def fetch_genesis(url: str, kind: GenesisKind | str | None = None, timeout: float = 10.0) -> bytes:
    """Download a published genesis file and check that it parses.

    ``kind`` defaults to whatever the first transaction says.
    """
    if not url.startswith(("http://", "https://")):
        raise NetworkError(f"only http(s) URLs are supported, got {url!r}", url=url)
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            status = resp.status
            body = resp.read()
    except urllib.error.HTTPError as exc:
        raise NetworkError(f"GET {url} returned {exc.code}", url=url, status=exc.code) from None
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise NetworkError(f"GET {url} failed: {exc}", url=url) from None
    if status != 200:
        raise NetworkError(f"GET {url} returned {status}", url=url, status=status)
    try:
        parse_genesis(body, kind if kind is not None else infer_kind(body))
    except GenesisFormatError as exc:
        raise GenesisInvalid(f"{url}: {exc}", cause=exc) from exc
    return body


@dataclass(frozen=True)
class InitReport:
    """Public output of the node key ceremony; the seed is deliberately not a field."""

    alias: str
    node_ip: str
    node_port: int
    client_ip: str
    client_port: int
    verkey: str
    did: str
    bls_key: str
    bls_pop: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "alias": self.alias,
            "node_ip": self.node_ip,
            "node_port": self.node_port,
            "client_ip": self.client_ip,
            "client_port": self.client_port,
            "verkey": self.verkey,
            "did": self.did,
            "bls_key": self.bls_key,
            "bls_pop": self.bls_pop,
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2).encode("utf-8") + b"\n"


def init_node_report(
    alias: str, node_ip: str, node_port: int | str, client_ip: str, client_port: int | str, seed: bytes
) -> InitReport:
    seed = keymat.check_seed(seed)
    if not alias:
        raise BadEndpoint("alias is empty")
    try:
        nip, nport, cip, cport = check_endpoints(node_ip, node_port, client_ip, client_port)
    except ValueError as exc:
        raise BadEndpoint(str(exc)) from None
    ident = keymat.derive_signing_identity(seed)
    bls = keymat.derive_bls_identity(seed)
    return InitReport(
        alias=alias,
        node_ip=nip,
        node_port=nport,
        client_ip=cip,
        client_port=cport,
        verkey=ident.verkey,
        did=ident.did,
        bls_key=bls.bls_key,
        bls_pop=bls.bls_pop,
    )

