"""Experiment configuration, scenario runners, and report serialization.

Scenarios are declarative: a JSON config names the model, the temperature,
the weight functions and the replica coupling; the runner produces a Report
whose records are deterministic for a fixed (config, seed).  CSV output
contains the records only (byte stable); JSON adds metadata and round-trips.
"""

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .classical import (
    bottleneck_ratio,
    classical_defected_ising_energy,
    classical_gap,
    classical_re_generator,
    glauber_generator,
    spin_table,
)
from .hamiltonians import HamiltonianSpec, assemble_dense, check_commuting_cut, defected_heisenberg_2d, defected_ising_1d
from .lindblad import WeightFunction, build_ckg_generator, eigensystem, gibbs_state
from .mixing import mixing_time_estimate
from .pauli import single_site_paulis
from .replica import SwapMode, build_replica_exchange_generator, joint_gibbs, theta
from .spectral import partial_lindbladian_check, spectral_gap
from .verify import run_verification


class ConfigError(ValueError):
    """Invalid or missing configuration field."""


class ResourceGuardError(RuntimeError):
    """Requested problem exceeds the configured superoperator dimension."""


SCENARIOS = ("gap", "sweep", "mixing", "verify", "theta", "classical")
WEIGHTS = ("metropolis", "gaussian")
REPLICA_MODES = ("local_A", "global", "none")

DEFAULT_CONFIG = {
    "system": {"model": "defected_ising", "n": 3, "J": 3.0},
    "beta": 1.0,
    "weight": "metropolis",
    "couplings": {"kind": "single_site", "sites": None},
    "replica": {"mode": "local_A", "swap_weight": "metropolis",
                "weight": "gaussian", "beta2": None},
    "scenario": "gap",
    "sweep": {"param": "J", "values": [1.0, 2.0, 3.0, 4.0, 5.0]},
    "seed": 42,
    "epsilon": 1e-2,
    "max_dim": 4096,
    "output": {"path": None, "format": "csv"},
}


@dataclass
class ExperimentConfig:
    system: dict
    beta: float
    weight: str
    couplings: dict
    replica: dict
    scenario: str
    sweep: dict
    seed: int
    epsilon: float
    max_dim: int
    output: dict

    def to_dict(self):
        return {
            "system": self.system,
            "beta": self.beta,
            "weight": self.weight,
            "couplings": self.couplings,
            "replica": self.replica,
            "scenario": self.scenario,
            "sweep": self.sweep,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "max_dim": self.max_dim,
            "output": self.output,
        }


@dataclass
class Report:
    scenario: str
    records: list
    wall_time: float
    version: str
    tolerances: dict
    summary: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "scenario": self.scenario,
            "records": self.records,
            "wall_time": self.wall_time,
            "version": self.version,
            "tolerances": self.tolerances,
            "summary": self.summary,
        }

    @staticmethod
    def from_json_dict(d):
        return Report(
            scenario=d["scenario"],
            records=d["records"],
            wall_time=d["wall_time"],
            version=d["version"],
            tolerances=d["tolerances"],
            summary=d.get("summary", {}),
        )


def validate_config(raw) -> ExperimentConfig:
    merged = {**DEFAULT_CONFIG, **raw}
    # system is a whole value (a raw fragment must not inherit the default
    # model name); the other dict fields merge field-by-field
    merged["system"] = dict(raw.get("system") or DEFAULT_CONFIG["system"])
    for key in ("couplings", "replica", "sweep", "output"):
        base = dict(DEFAULT_CONFIG[key])
        base.update(merged.get(key) or {})
        merged[key] = base
    if merged["scenario"] not in SCENARIOS:
        raise ConfigError(f"field 'scenario': unknown value {merged['scenario']!r}, "
                          f"expected one of {SCENARIOS}")
    if merged["weight"] not in WEIGHTS:
        raise ConfigError(f"field 'weight': unknown value {merged['weight']!r}")
    rep = merged["replica"]
    if rep["mode"] not in REPLICA_MODES:
        raise ConfigError(f"field 'replica.mode': unknown value {rep['mode']!r}")
    if rep["swap_weight"] != "metropolis":
        raise ConfigError("field 'replica.swap_weight': only 'metropolis' is supported")
    if rep.get("weight", "gaussian") not in WEIGHTS:
        raise ConfigError(f"field 'replica.weight': unknown value {rep['weight']!r}")
    if merged["sweep"]["param"] not in ("J", "beta"):
        raise ConfigError(f"field 'sweep.param': must be 'J' or 'beta'")
    if not 0 < float(merged["epsilon"]) < 1:
        raise ConfigError("field 'epsilon': must lie in (0, 1)")
    if merged["output"]["format"] not in ("csv", "json"):
        raise ConfigError(f"field 'output.format': must be 'csv' or 'json'")
    try:
        beta = float(merged["beta"])
    except (TypeError, ValueError):
        raise ConfigError("field 'beta': not a number")
    if beta <= 0:
        raise ConfigError("field 'beta': must be positive")
    return ExperimentConfig(
        system=merged["system"],
        beta=beta,
        weight=merged["weight"],
        couplings=merged["couplings"],
        replica=merged["replica"],
        scenario=merged["scenario"],
        sweep=merged["sweep"],
        seed=int(merged["seed"]),
        epsilon=float(merged["epsilon"]),
        max_dim=int(merged["max_dim"]),
        output=merged["output"],
    )


def parse_config(path) -> ExperimentConfig:
    """Load and validate a JSON config file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return validate_config(raw)


def build_system(config: ExperimentConfig, J=None) -> HamiltonianSpec:
    sys = config.system
    model = sys.get("model")
    if model == "defected_ising":
        return defected_ising_1d(int(sys.get("n", 3)), float(J if J is not None else sys.get("J", 3.0)))
    if model == "defected_heisenberg":
        return defected_heisenberg_2d(
            int(sys["rows"]), int(sys["cols"]), tuple(sys["A"]),
            tuple(sys["defect_edge"]), float(J if J is not None else sys.get("J", 3.0)),
        )
    if "terms" in sys:
        spec = HamiltonianSpec.from_json_dict(sys)
        if J is not None:
            if spec.defect is None:
                raise ConfigError("field 'sweep': J sweep on a raw system needs a defect entry")
            edge, _ = spec.defect
            terms = []
            for t in spec.terms:
                if t.support == set(edge) and all(lab == "Z" for _, lab in t.factors):
                    terms.append(type(t)(-float(J), t.factors))
                else:
                    terms.append(t)
            spec = HamiltonianSpec(n=spec.n, terms=tuple(terms), partition=spec.partition,
                                   defect=(edge, float(J)))
        return spec
    raise ConfigError(f"field 'system': unknown model {model!r} and no raw terms")


def _guard_dims(config: ExperimentConfig, spec: HamiltonianSpec):
    dim = 2**spec.n
    if config.replica["mode"] == "local_A" and spec.partition is not None:
        dim *= 2 ** len(spec.partition[0])
    elif config.replica["mode"] == "global":
        dim = dim * dim
    if dim * dim > config.max_dim:
        raise ResourceGuardError(
            f"superoperator dimension {dim * dim} exceeds guard {config.max_dim}; "
            "raise --max-dim to override"
        )


def _single_gap(spec, beta, weight_kind):
    H = assemble_dense(spec)
    es = eigensystem(H)
    heis, _ = build_ckg_generator(H, single_site_paulis(spec.n),
                                  WeightFunction(weight_kind, beta), es=es)
    return spectral_gap(heis, gibbs_state(es, beta))


def _replica_gap(spec, beta, replica_cfg):
    w = WeightFunction(replica_cfg.get("weight", "gaussian"), beta)
    mode = SwapMode(replica_cfg["mode"], beta2=replica_cfg.get("beta2"))
    heis, _ = build_replica_exchange_generator(spec, beta, w, w, mode)
    return spectral_gap(heis, joint_gibbs(spec, beta))


def _sweep_point(args):
    config_dict, value = args
    config = validate_config(config_dict)
    if config.sweep["param"] == "J":
        spec = build_system(config, J=value)
        beta = config.beta
        J = float(value)
    else:
        spec = build_system(config)
        beta = float(value)
        J = spec.defect[1] if spec.defect else float("nan")
    _guard_dims(config, spec)
    rec = {"J": J, "beta": beta}
    single = _single_gap(spec, beta, config.weight)
    rec["gap_single"] = single.gap
    if config.replica["mode"] != "none":
        rep = _replica_gap(spec, beta, config.replica)
        rec["gap_re"] = rep.gap
        part = partial_lindbladian_check(
            spec, beta, WeightFunction(config.replica.get("weight", "gaussian"), beta),
            seed=config.seed,
        )
        rec["g_B"] = part["g_b"]
        cut = check_commuting_cut(spec)
        d_a = 2 ** len(spec.partition[0])
        denom = min(part["g_b"], 1.0)
        rec["bound_ratio"] = rep.gap * d_a * np.exp(4 * beta * cut.k_count * cut.v_max) / denom
    else:
        rec["gap_re"] = float("nan")
        rec["g_B"] = float("nan")
        rec["bound_ratio"] = float("nan")
    return rec


def run_scenario(config: ExperimentConfig, parallel=1) -> Report:
    """Dispatch on config.scenario and assemble the Report."""
    t0 = time.perf_counter()
    tolerances = {"kernel_tol": 1e-9, "quad_abs_tol": 1e-12, "db_tol": 1e-8,
                  "max_dim": config.max_dim, "seed": config.seed}
    summary = {}
    scenario = config.scenario

    if scenario == "gap":
        spec = build_system(config)
        _guard_dims(config, spec)
        if config.replica["mode"] == "none":
            rep = _single_gap(spec, config.beta, config.weight)
        else:
            rep = _replica_gap(spec, config.beta, config.replica)
        records = [{"J": spec.defect[1] if spec.defect else float("nan"),
                    "beta": config.beta, **rep.to_json_dict()}]

    elif scenario == "sweep":
        jobs = [(config.to_dict(), v) for v in config.sweep["values"]]
        if parallel > 1:
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                records = list(pool.map(_sweep_point, jobs))
        else:
            records = [_sweep_point(j) for j in jobs]
        gaps = [r["gap_single"] for r in records]
        summary["gap_single_ratio"] = gaps[-1] / gaps[0] if gaps[0] else float("nan")
        res = [r["gap_re"] for r in records if np.isfinite(r["gap_re"])]
        if res:
            summary["gap_re_max_over_min"] = max(res) / min(res)

    elif scenario == "mixing":
        spec = build_system(config)
        _guard_dims(config, spec)
        H = assemble_dense(spec)
        es = eigensystem(H)
        heis, _ = build_ckg_generator(H, single_site_paulis(spec.n),
                                      WeightFunction(config.weight, config.beta), es=es)
        mrep = mixing_time_estimate(heis, gibbs_state(es, config.beta), config.epsilon,
                                    seed=config.seed)
        records = [{"state_id": sid, "t_cross": t} for sid, t in mrep.crossings]
        summary = {k: v for k, v in mrep.to_json_dict().items() if k != "crossings"}

    elif scenario == "verify":
        records = run_verification(seed=config.seed, beta=config.beta)
        summary["passed"] = all(r["passed"] for r in records)
        summary["n_failed"] = sum(not r["passed"] for r in records)

    elif scenario == "theta":
        beta = config.beta
        w = WeightFunction("metropolis", beta)
        from .lindblad import alpha_coeff

        records = []
        worst = 0.0
        for x in np.linspace(-20.0, 20.0, 401):
            closed = theta(x)
            quad = alpha_coeff(x / beta, x / beta, w)
            records.append({"beta_omega": float(x), "theta_closed": float(closed),
                            "theta_quadrature": float(quad),
                            "abs_diff": float(abs(closed - quad))})
            worst = max(worst, abs(closed - quad))
        summary["max_abs_diff"] = worst

    elif scenario == "classical":
        n = int(config.system.get("n", 4))
        beta1 = config.beta
        beta2 = config.replica.get("beta2") or 0.2
        records = []
        for J in config.sweep["values"]:
            efn = lambda z: classical_defected_ising_energy(z, float(J))
            chain = glauber_generator(efn, n, beta1)
            energies = classical_defected_ising_energy(spin_table(n), float(J))
            if chain.n_states <= 20:
                phi, _ = bottleneck_ratio(chain, mode="exact")
                phi_mode = "exact"
            else:
                phi, _ = bottleneck_ratio(chain, mode="candidate", energies=energies)
                phi_mode = "candidate_upper_bound"
            rec = {"J": float(J), "beta": beta1,
                   "gap_single": classical_gap(chain),
                   "gap_re": classical_gap(classical_re_generator(efn, n, beta1, beta2)),
                   "phi_star": phi, "phi_mode": phi_mode}
            records.append(rec)
        gaps = [r["gap_single"] for r in records]
        if len(gaps) > 1:
            summary["single_collapse"] = max(gaps) / min(gaps)
            res = [r["gap_re"] for r in records]
            summary["re_max_over_min"] = max(res) / min(res)

    else:  # pragma: no cover - validate_config blocks this
        raise ConfigError(f"unknown scenario {scenario}")

    return Report(
        scenario=scenario,
        records=records,
        wall_time=time.perf_counter() - t0,
        version=__version__,
        tolerances=tolerances,
        summary=summary,
    )


CSV_COLUMNS = {
    "gap": ["J", "beta", "gap", "kernel_dim", "kms_norm", "eigs", "tol"],
    "sweep": ["J", "beta", "gap_single", "gap_re", "g_B", "bound_ratio"],
    "mixing": ["state_id", "t_cross"],
    "verify": ["check", "passed", "detail"],
    "theta": ["beta_omega", "theta_closed", "theta_quadrature", "abs_diff"],
    "classical": ["J", "beta", "gap_single", "gap_re", "phi_star", "phi_mode"],
}


def _csv_cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, list):
        return ";".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                        for v in value)
    return str(value)


def render_csv(report: Report) -> str:
    cols = CSV_COLUMNS[report.scenario]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for rec in report.records:
        writer.writerow([_csv_cell(rec.get(c, "")) for c in cols])
    return buf.getvalue()


def emit(report: Report, fmt: str, path) -> str:
    """Serialize the report; returns the text that was written."""
    if fmt == "csv":
        text = render_csv(report)
    elif fmt == "json":
        text = json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n"
    else:
        raise ConfigError(f"field 'output.format': unknown format {fmt!r}")
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
