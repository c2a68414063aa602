"""
Command-line entry point.

Every subcommand reads a flat key-value YAML config, validates it before
doing any work, and writes CSV data plus a JSON sidecar into ``--out``.
The sidecar carries a hash of the resolved config so runs can be matched
to their inputs; identical configs give byte-identical files.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 precondition
violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from . import ideal, quench
from .lanczos import KrylovChain, RingGeometry, SeedConservedError, lanczos_run, read_chain_csv, truncation_drift
from .models import SEEDS, ModelSpec, build_seed, seed_density
from .open_chain import (
    KINDS,
    EvolutionError,
    build_liouvillian,
    default_time_grid,
    dissipative_toy,
    eigenvector_csv,
    evolve,
    linear_coefficients,
    spectrum,
    spectrum_csv,
    sqrt_coefficients,
    trajectory_csv,
)
from .pauli import TruncationPolicy, dumps

log = logging.getLogger("openkrylov")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PRECONDITION = 0, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

SPIN_MODELS = ("xxz", "chaotic_ising")
CHAIN_MODELS = ("linear", "sqrt", "toy", "file")

# key -> (type, default); None default means "absent unless given"
SCHEMA: dict[str, tuple[type, object]] = {
    "model": (str, "xxz"),
    "n_sites": (int, None),
    "delta": (float, -0.5),
    "h": (float, 2.0),
    "seed": (str, "Q3"),
    "depth": (int, 40),
    "translation_reduced": (bool, True),
    "coeff_threshold": (float, 0.0),
    "max_strings": (int, None),
    "max_weight": (int, None),
    "drift_max_strings": (str, None),
    "boundary": (str, "open"),
    "alpha": (float, 1.0),
    "gamma": (float, None),
    "chain_file": (str, None),
    "t_max_inv_J": (float, 10.0),
    "dt_inv_J": (float, None),
    "sites": (str, "0"),
    "eps_perpetual": (float, None),
    "evolve_method": (str, "auto"),
    "export_basis": (bool, False),
    "rounds": (int, 3),
    "near_real_fraction": (float, 1.0),
    "case": (str, "linear"),
}


@dataclass
class RunConfig:
    values: dict
    seed_label: str

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError:
            raise AttributeError(key) from None

    def canonical(self) -> dict:
        return {**self.values, "seed_label": self.seed_label}

    @property
    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(self.coeff_threshold, self.max_strings, self.max_weight)

    @property
    def boundaries(self) -> list[str]:
        return [b.strip() for b in self.boundary.split(",")]


def _coerce(key: str, value, typ):
    if typ is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(key, f"expected true/false, got {value!r}")
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(key, "must be finite")
        return float(value)
    if not isinstance(value, (str, int, float)) or isinstance(value, bool):
        raise ConfigError(key, f"expected text, got {value!r}")
    return str(value)


def load_config(text: str | None, overrides: list[str] = (), seed_label: str | None = None) -> RunConfig:
    """Parse and validate a flat config; ``overrides`` are ``key=value`` strings."""
    raw = {}
    if text:
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"not valid key-value text: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config", "top level must be key: value pairs")
    for item in overrides:
        if "=" not in item:
            raise ConfigError("--set", f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = yaml.safe_load(v)
    values = {}
    for key, value in raw.items():
        if key not in SCHEMA:
            raise ConfigError(str(key), "unknown key")
        if isinstance(value, (dict, list)):
            raise ConfigError(key, "nested values are not allowed")
        values[key] = None if value is None else _coerce(key, value, SCHEMA[key][0])
    for key, (_, default) in SCHEMA.items():
        values.setdefault(key, default)
    cfg = RunConfig(values, seed_label if seed_label is not None else values["seed"])
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.model not in SPIN_MODELS + CHAIN_MODELS:
        raise ConfigError("model", f"must be one of {SPIN_MODELS + CHAIN_MODELS}")
    if cfg.seed not in SEEDS:
        raise ConfigError("seed", f"must be one of {SEEDS}")
    if cfg.depth < 1:
        raise ConfigError("depth", "must be >= 1")
    for b in cfg.boundaries:
        if b not in KINDS:
            raise ConfigError("boundary", f"{b!r} is not one of {KINDS}")
    if cfg.n_sites is not None and not 2 <= cfg.n_sites <= 64:
        raise ConfigError("n_sites", "must lie in [2, 64]")
    if cfg.max_strings is not None and cfg.max_strings < 1:
        raise ConfigError("max_strings", "must be positive")
    if cfg.max_weight is not None and cfg.max_weight < 1:
        raise ConfigError("max_weight", "must be positive")
    if cfg.coeff_threshold < 0:
        raise ConfigError("coeff_threshold", "must be nonnegative")
    if cfg.t_max_inv_J <= 0:
        raise ConfigError("t_max_inv_J", "time grid is empty; must be positive")
    if cfg.dt_inv_J is not None and cfg.dt_inv_J <= 0:
        raise ConfigError("dt_inv_J", "must be positive")
    if cfg.eps_perpetual is not None and cfg.eps_perpetual < 0:
        raise ConfigError("eps_perpetual", "must be nonnegative")
    if cfg.evolve_method not in ("auto", "expm", "ode"):
        raise ConfigError("evolve_method", "must be auto, expm or ode")
    if cfg.model == "file" and not cfg.chain_file:
        raise ConfigError("chain_file", "required when model is file")
    if cfg.model == "toy" and cfg.gamma is None:
        raise ConfigError("gamma", "required for the dissipative toy chain")
    if cfg.gamma is not None and not 0 < cfg.gamma < 1:
        raise ConfigError("gamma", "must lie in (0, 1)")
    if cfg.case not in ("linear", "sqrt", "dissipative_toy", "boundary"):
        raise ConfigError("case", "must be linear, sqrt, dissipative_toy or boundary")
    try:
        _int_list(cfg.sites)
        if cfg.drift_max_strings:
            _int_list(cfg.drift_max_strings)
    except ValueError:
        raise ConfigError("sites", "comma-separated integers expected") from None


def _int_list(text: str) -> list[int]:
    return [int(s) for s in str(text).split(",") if s.strip()]


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _check_finite(**arrays) -> None:
    for name, a in arrays.items():
        a = np.asarray(a)
        if a.size and not np.all(np.isfinite(a)):
            raise NumericalFailure(f"non-finite values in {name}")


class Output:
    def __init__(self, out: Path, cfg: RunConfig, command: str):
        self.out, self.cfg, self.command = out, cfg, command
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").unlink(missing_ok=True)

    def text(self, name: str, content: str, header: bool = True) -> Path:
        path = self.out / name
        if header:
            content = f"# config_hash: {self.cfg.hash}\n" + content
        path.write_text(content)
        return path

    def sidecar(self, name: str, payload: dict) -> Path:
        doc = {"command": self.command, "config_hash": self.cfg.hash, "config": self.cfg.canonical(), **payload}
        return self.text(name, json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n", header=False)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        raise NumericalFailure("non-finite value in report")
    return obj


def _spin_setup(cfg: RunConfig):
    spec = ModelSpec(cfg.model, cfg.n_sites or 0, {"delta": cfg.delta, "h": cfg.h})
    geometry_probe = RingGeometry(64, cfg.translation_reduced)
    seed_span = max(len(k) for k in seed_density(cfg.seed))
    n = cfg.n_sites
    if n is None:
        n = geometry_probe.required_sites(cfg.depth, seed_span)
        if n > 64:
            raise ConfigError("depth", f"needs a ring of {n} sites; at most 64 are supported, set n_sites")
        if not cfg.translation_reduced:
            raise ConfigError("n_sites", "required when translation_reduced is false")
    spec.n_sites = n
    H = spec.build()
    O0 = build_seed(cfg.seed, n)
    return spec, H, O0, RingGeometry(n, cfg.translation_reduced)


def _run_lanczos(cfg: RunConfig, keep_basis: bool, depth: int | None = None,
                 policy: TruncationPolicy | None = None) -> KrylovChain:
    spec, H, O0, geometry = _spin_setup(cfg)
    return lanczos_run(H, O0, cfg.depth if depth is None else depth, policy or cfg.policy, geometry,
                       keep_basis=keep_basis, seed_label=cfg.seed_label, model_label=spec.label)


def _coefficients(cfg: RunConfig, chain: KrylovChain | None = None) -> np.ndarray:
    m = cfg.depth + 1
    if cfg.model == "linear":
        return linear_coefficients(m, cfg.alpha)
    if cfg.model == "sqrt":
        return sqrt_coefficients(m)
    if cfg.model == "toy":
        return np.sqrt(1 - cfg.gamma**2) * np.arange(1, m + 1.0)
    if cfg.model == "file":
        try:
            return read_chain_csv(Path(cfg.chain_file).read_text())
        except OSError as exc:
            raise ConfigError("chain_file", str(exc)) from None
        except (KeyError, ValueError) as exc:
            raise ConfigError("chain_file", f"not a chain CSV with a b_n column: {exc}") from None
    return (chain or _run_lanczos(cfg, keep_basis=False)).b


def _liouvillian(cfg: RunConfig, b: np.ndarray, kind: str, l: int | None = None):
    l = cfg.depth if l is None else l
    if cfg.model == "toy":
        return dissipative_toy(cfg.gamma, l)
    if len(b) < l + (kind == "open"):
        raise SeedConservedError(
            f"Krylov space closed after {len(b)} coefficients; depth {l} with {kind} boundary is not available")
    return build_liouvillian(b, l, kind, cfg.gamma)


def _times(cfg: RunConfig, L) -> np.ndarray:
    if cfg.dt_inv_J:
        n = int(math.ceil(cfg.t_max_inv_J / cfg.dt_inv_J))
        return np.linspace(0.0, cfg.t_max_inv_J, n + 1)
    return default_time_grid(L, cfg.t_max_inv_J)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_lanczos(cfg: RunConfig, out: Output) -> None:
    if cfg.model not in SPIN_MODELS:
        raise ConfigError("model", "lanczos needs a spin model (xxz or chaotic_ising)")
    chain = _run_lanczos(cfg, keep_basis=cfg.export_basis)
    _check_finite(b=chain.b)
    out.text("chain.csv", chain.to_csv())
    payload = {"n_coefficients": len(chain.b), "closed": chain.closed, "seed_norm": chain.seed_norm,
               "max_strings_seen": max(chain.string_counts), "geometry": chain.geometry.as_dict(),
               "policy": chain.truncation.as_dict()}
    if cfg.drift_max_strings:
        caps = _int_list(cfg.drift_max_strings)
        chains = [_run_lanczos(cfg, False, policy=TruncationPolicy(cfg.coeff_threshold, c, cfg.max_weight))
                  for c in caps] + [chain]
        drift = truncation_drift(chains)
        _check_finite(drift=drift)
        payload["drift"] = {"levels": caps + [cfg.max_strings],
                            "max_abs_change": [float(d.max()) for d in drift]}
    if cfg.export_basis:
        (out.out / "basis").mkdir(exist_ok=True)
        for n, op in enumerate(chain.basis):
            out.text(f"basis/O_{n:03d}.txt", dumps(op), header=False)
        payload["basis_files"] = len(chain.basis)
    out.sidecar("chain.json", payload)


def cmd_spectrum(cfg: RunConfig, out: Output) -> None:
    b = _coefficients(cfg)
    _check_finite(b=b)
    kind = cfg.boundaries[0]
    if cfg.model == "toy":
        kind = "diagonal_dissipative"
    L = _liouvillian(cfg, b, kind)
    modes = spectrum(L, cfg.eps_perpetual)
    om = np.array([m.omega for m in modes])
    _check_finite(omega=om)
    out.text("spectrum.csv", spectrum_csv(modes))
    out.text("eigenvectors.csv", eigenvector_csv(modes))
    counts = {c: sum(m.cls == c for m in modes) for c in ("perpetual", "transient", "growing")}
    out.sidecar("spectrum.json", {
        "kind": kind, "l": L.l, "n_modes": len(modes), "classes": counts,
        "median_im_omega": float(np.median(om.imag)),
        "slowest": [m.omega for m in modes[:5]],
        "max_residual": max(m.residual for m in modes),
    })


def cmd_evolve(cfg: RunConfig, out: Output) -> None:
    b = _coefficients(cfg)
    _check_finite(b=b)
    sites = _int_list(cfg.sites)
    payload = {"series": {}}
    for kind in cfg.boundaries:
        if cfg.model == "toy":
            kind = "diagonal_dissipative"
        L = _liouvillian(cfg, b, kind)
        if max(sites) > L.l:
            raise ConfigError("sites", f"site {max(sites)} beyond chain of size {L.size}")
        times = _times(cfg, L)
        states = evolve(L, times, method=cfg.evolve_method)
        _check_finite(phi=[s.phi for s in states])
        out.text(f"trajectory_{kind}.csv", trajectory_csv(states, sites))
        payload["series"][kind] = {"n_times": len(times), "final_norm": float(np.linalg.norm(states[-1].phi))}
    out.sidecar("evolve.json", payload)


def cmd_quench(cfg: RunConfig, out: Output) -> None:
    if cfg.model not in SPIN_MODELS:
        raise ConfigError("model", "quench needs a spin model")
    chain = _run_lanczos(cfg, keep_basis=True)
    payload = {"series": {}, "seed_weight": None}
    for kind in cfg.boundaries:
        L = _liouvillian(cfg, chain.b, kind, l=min(cfg.depth, len(chain.basis) - 1))
        times = _times(cfg, L)
        res = quench.quench_trajectory(chain, L, times, cfg.evolve_method)
        _check_finite(expectation=res.expectation)
        out.text(f"quench_{kind}.csv", res.to_csv())
        payload["series"][kind] = {"n_times": len(times), "initial": float(res.expectation[0]),
                                   "final": float(res.expectation[-1])}
        payload["seed_weight"] = float(res.weights[0])
    out.sidecar("quench.json", payload)


def cmd_validate_ideal(cfg: RunConfig, out: Output) -> None:
    l = cfg.depth
    if cfg.case == "linear":
        reports = [ideal.verify_linear_chain_structure(l, cfg.alpha), ideal.verify_meixner_eigenvectors(l)]
    elif cfg.case == "boundary":
        reports = [ideal.verify_boundary_roots(l)]
    elif cfg.case == "sqrt":
        reports = [ideal.verify_hermite_eigenvectors(l)]
    else:
        if cfg.gamma is None:
            raise ConfigError("gamma", "required for case dissipative_toy")
        reports = [ideal.verify_dissipative_toy(cfg.gamma, l)]
    docs = [json.loads(r.to_json()) for r in reports]
    passed = all(r.passed for r in reports)
    out.sidecar("validate_ideal.json", {"passed": passed, "reports": docs})
    if not passed:
        failed = [f"{r.case}:{c.name}" for r in reports for c in r.checks if not c.passed]
        raise NumericalFailure("validation failed: " + ", ".join(failed))


def cmd_refine(cfg: RunConfig, out: Output) -> None:
    if cfg.model not in SPIN_MODELS:
        raise ConfigError("model", "refine needs a spin model")
    if cfg.rounds < 1:
        raise ConfigError("rounds", "must be >= 1")
    spec, H, O0, geometry = _spin_setup(cfg)
    res = quench.iterative_refine(H, O0, cfg.rounds, cfg.depth, cfg.policy, geometry, cfg.near_real_fraction)
    _check_finite(omega=np.array(res.omegas), residual=np.array(res.residuals))
    out.text("refined_operator.txt", dumps(res.operator), header=False)
    out.sidecar("refine.json", {"omegas": res.omegas, "residuals": res.residuals,
                                "stabilizing": res.stabilizing, "stopped": res.stopped})


COMMANDS = {
    "lanczos": cmd_lanczos,
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "quench": cmd_quench,
    "validate-ideal": cmd_validate_ideal,
    "refine": cmd_refine,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="openkrylov", description=__doc__.strip().splitlines()[0])
    p.add_argument("command", choices=list(COMMANDS))
    p.add_argument("--config", type=Path, help="flat key: value config file")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread cap")
    p.add_argument("--seed-label", default=None, help="label recorded for the seed operator")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def _fail(out_dir: Path, code: int, exc: BaseException, field: str | None = None) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if field:
        doc["field"] = field
    text = json.dumps(doc, sort_keys=True)
    print(text, file=sys.stderr)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "error.json").write_text(text + "\n")
    except OSError:
        pass
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        return _fail(args.out, EXIT_CONFIG, ConfigError("--threads", "must be >= 1"), "--threads")
    try:
        text = args.config.read_text() if args.config else None
        cfg = load_config(text, args.set, args.seed_label)
    except OSError as exc:
        return _fail(args.out, EXIT_CONFIG, exc, "--config")
    except ConfigError as exc:
        return _fail(args.out, EXIT_CONFIG, exc, exc.field)
    out = Output(args.out, cfg, args.command)
    try:
        with threadpool_limits(limits=args.threads):
            COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        return _fail(args.out, EXIT_CONFIG, exc, exc.field)
    except (NumericalFailure, EvolutionError, np.linalg.LinAlgError, OverflowError, FloatingPointError) as exc:
        return _fail(args.out, EXIT_NUMERICAL, exc)
    except (SeedConservedError, quench.RefinementError, ValueError) as exc:
        return _fail(args.out, EXIT_PRECONDITION, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
