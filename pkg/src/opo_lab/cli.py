"""Command-line front end: each subcommand writes one CSV table or JSON document.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import __version__
from . import config as cfgmod
from . import estimation as est
from . import gaussian as gs
from . import montecarlo as mc
from . import numerics, phase
from .config import RunConfig
from .errors import ConfigError, NoBracket, NoThreshold, OpoLabError, RangeError
from .noise import GaussianMixture, PhaseNoiseParams, dephase, dephase_then_opo
from .opo import amplified_mean, d_from_r, output_moments

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# ---------------------------------------------------------------------------
# Output helpers

def fmt(x) -> str:
    """Shortest round-trip text for a number."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class Table:
    def __init__(self, columns: Sequence[str], rows: Iterable[Sequence] = ()):
        self.columns = list(columns)
        self.rows = [list(r) for r in rows]

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        buf.write(",".join(self.columns) + "\n")
        for r in self.rows:
            buf.write(",".join(fmt(v) for v in r) + "\n")
        return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_document(cfg: RunConfig, payload: dict) -> str:
    doc = {"config_hash": cfg.digest(), "version": __version__, **_clean(payload)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def threads() -> int:
    raw = os.environ.get("OPO_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"OPO_LAB_THREADS must be an integer, got {raw!r}")


def ordered_map(f: Callable, items: Sequence) -> list:
    """Evaluate ``f`` over ``items``, possibly concurrently; results keep input order."""
    n = threads()
    if n == 1:
        return [f(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(f, items))


# ---------------------------------------------------------------------------
# Subcommands

def cmd_opo_moments(cfg: RunConfig) -> Table:
    cols = ["d", "eta_in", "eta_esc", "alpha", "phi_in", "alpha_q_tilde", "alpha_p_tilde",
            "sigma2_q", "sigma2_p", "alpha_out", "phi_out", "r"]
    rows = []
    for d in cfg.values("d_values"):
        opo = cfg.opo(d)
        for phi_in in cfg.values("phi_in_values"):
            m = output_moments(opo, cfg.alpha, phi_in)
            a_out, phi_out = amplified_mean(opo, cfg.alpha, phi_in)
            rows.append([d, opo.eta_in, opo.eta_esc, cfg.alpha, phi_in, m.alpha_q_tilde,
                         m.alpha_p_tilde, m.sigma2_q, m.sigma2_p, a_out, phi_out, opo.r])
    return Table(cols, rows)


def cmd_phase_dist(cfg: RunConfig) -> Table:
    noise = PhaseNoiseParams(cfg.sigma)
    mixes = [
        GaussianMixture.single(gs.coherent(cfg.alpha)),
        dephase(cfg.alpha, noise, cfg.nodes),
        dephase_then_opo(cfg.alpha, noise, cfg.opo(), cfg.nodes),
    ]
    dists = ordered_map(lambda m: phase.phase_density(m, cfg.grid, with_hwhm=False), mixes)
    grid = dists[0].phi_grid
    return Table(["phi", "p0", "pD", "pout"],
                 zip(grid, *(d.density for d in dists)))


def cmd_hwhm_map(cfg: RunConfig) -> tuple[Table, Table]:
    """Top: dephased and OPO widths over (alpha, sigma). Bottom: noiseless widths per d."""
    opo = cfg.opo()
    pts = [(a, s) for a in cfg.values("alpha_values") for s in cfg.values("sigma_values")]

    def top(pt):
        a, s = pt
        return [a, s, phase.gamma_dephased(a, s, cfg.nodes, cfg.map_grid),
                phase.gamma_out(a, s, opo, cfg.nodes, cfg.map_grid)]

    pts2 = [(a, d) for d in cfg.values("map_d_values") for a in cfg.values("alpha_values")]

    def bottom(pt):
        a, d = pt
        return [a, phase.gamma_seed(a, cfg.map_grid),
                phase.gamma_squeezed(a, cfg.opo(d), cfg.map_grid), d]

    return (Table(["alpha", "sigma", "gamma_D", "gamma_out"], ordered_map(top, pts)),
            Table(["alpha", "gamma_0", "gamma_S", "d"], ordered_map(bottom, pts2)))


def _search_report(fn: Callable[[], phase.ThresholdSearch]) -> tuple[Optional[float], dict]:
    try:
        res = fn()
    except NoBracket as exc:
        return None, {"error": str(exc)}
    return res.root, {"bracket": list(res.bracket), "search_range": list(res.search_range),
                      "scan_points": res.scan_points}


def cmd_thresholds(cfg: RunConfig) -> dict:
    opo = cfg.opo()
    diag = {}
    alpha_th, diag["alpha_th"] = _search_report(lambda: phase.search_threshold(
        lambda a: phase.alpha_gap(a, opo, cfg.map_grid), *cfg.alpha_range, 1e-4, 64, "alpha_th"))
    sigma_dir, diag["sigma_th_direct"] = _search_report(lambda: phase.search_threshold(
        lambda s: phase.sigma_gap(s, cfg.alpha, opo, cfg.nodes, cfg.map_grid),
        *cfg.sigma_range, 1e-4, 64, "sigma_th_direct"))
    d_th, diag["d_th"] = _search_report(lambda: phase.search_threshold(
        lambda d: phase.snr_residual(d, cfg.eta_in, cfg.eta_esc), 0.0, 0.999, 1e-12, 64, "d_th"))
    try:
        sigma_ind = phase.threshold_sigma_indirect(cfg.alpha, opo)
        diag["sigma_th_indirect"] = {"method": "closed form"}
    except NoThreshold as exc:
        sigma_ind = None
        diag["sigma_th_indirect"] = {"error": str(exc)}
    return {"alpha": cfg.alpha, "d": cfg.d, "eta_in": cfg.eta_in, "eta_esc": cfg.eta_esc,
            "alpha_th": alpha_th, "sigma_th_direct": sigma_dir, "d_th": d_th,
            "sigma_th_indirect": sigma_ind, "diagnostics": diag}


def cmd_indirect(cfg: RunConfig) -> Table:
    opo = cfg.opo()
    rows = []
    for a in cfg.values("alpha_values"):
        for s in cfg.values("sigma_values"):
            rows.append([a, s,
                         phase.indirect_variance("seed", a).variance,
                         phase.indirect_variance("dephased", a, s).variance,
                         phase.indirect_variance("opo", a, s, opo).variance])
    return Table(["alpha", "sigma", "var_seed", "var_dephased", "var_opo"], rows)


def cmd_fisher(cfg: RunConfig) -> tuple[Table, Table]:
    """Top: QFI and optimised homodyne FI versus squeezing. Bottom: FI versus quadrature angle."""
    rows = []
    for r in cfg.values("r_values"):
        opo = cfg.opo(d_from_r(r))
        choice = est.optimized_quadrature(opo, cfg.alpha, cfg.theta)
        rows.append([r, est.energy(opo, cfg.alpha), est.qfi_noiseless(opo, cfg.alpha),
                     choice.fi, choice.phi_max, choice.branch])
    scan = []
    phis = np.linspace(0.0, math.pi, cfg.scan_points)
    for r in cfg.values("scan_r_values"):
        opo = cfg.opo(d_from_r(r))
        scan.extend([r, p, est.fi_homodyne_noiseless(opo, cfg.alpha, cfg.theta, p)] for p in phis)
    return (Table(["r", "N", "H_nl", "F_nl", "phi_max", "branch"], rows),
            Table(["r", "phi", "F"], scan))


def cmd_noisy_fisher(cfg: RunConfig) -> Table:
    base = cfg.opo()
    pts = [(n, s) for s in cfg.values("sigma_values") for n in cfg.values("n_values")]

    def row(pt):
        n, s = pt
        opo = base.with_d(est.d_for_energy(base, cfg.alpha, n))
        rep = est.noisy_report(opo, cfg.alpha, s, cfg.theta, cfg.nodes)
        return [rep.energy, s, rep.fi, rep.fi_noiseless, rep.epsilon,
                math.nan if rep.bound is None else rep.bound]

    return Table(["N", "sigma", "F_n", "F_nl", "epsilon", "H_UB"], ordered_map(row, pts))


def cmd_mc_validate(cfg: RunConfig) -> dict:
    """Sampling battery against the analytic densities and variances."""
    noise = PhaseNoiseParams(cfg.sigma)
    mix_d = dephase(cfg.alpha, noise, cfg.nodes)
    mix_out = dephase_then_opo(cfg.alpha, noise, cfg.opo(), cfg.nodes)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(8, dtype=np.uint64).tolist()
    sc = lambda k, n=cfg.samples: mc.SampleConfig(n, int(seeds[k]), cfg.bins)
    checks = {}

    # heterodyne histogram against the phase density, per-bin probability mass
    samples = mc.sample_heterodyne(mix_d, sc(0))
    hist, edges = mc.phase_histogram(samples, cfg.bins)
    expected = bin_masses(phase.phase_density(mix_d, cfg.grid, with_hwhm=False), edges)
    dev = float(np.max(np.abs(hist - expected)))
    checks["heterodyne_histogram"] = {"max_bin_deviation": dev,
                                      "max_density_deviation": dev / (edges[1] - edges[0]),
                                      "threshold": 5e-3, "pass": dev < 5e-3}

    # homodyne KS tests
    for k, (name, mix, phi) in enumerate([("homodyne_ks_dephased", mix_d, 0.0),
                                          ("homodyne_ks_opo", mix_out, math.pi / 2)], start=1):
        x = mc.sample_homodyne(mix, cfg.theta, phi, sc(k, min(cfg.samples, 100_000)))
        model = est.HomodyneModel(mix, cfg.theta, phi)
        stat = numerics.ks_statistic(x, model.cdf)
        crit = numerics.ks_critical(len(x), 0.01)
        checks[name] = {"statistic": stat, "critical": crit, "pass": stat < crit}

    # q-variance against the closed form
    x = mc.sample_homodyne(mix_d, 0.0, 0.0, sc(3))
    target = phase.indirect_variance("dephased", cfg.alpha, cfg.sigma).var_q
    se = float(np.std((x - x.mean()) ** 2) / math.sqrt(len(x)))
    checks["q_variance"] = {"sample": float(x.var()), "target": target, "standard_error": se,
                            "pass": abs(x.var() - target) < 3 * se}

    # batched plug-in estimator against the propagated variance
    n = cfg.batches * cfg.batch_size
    q = mc.sample_homodyne(mix_d, 0.0, 0.0, sc(4, n)).reshape(cfg.batches, -1).mean(axis=1)
    p = mc.sample_homodyne(mix_d, 0.0, math.pi / 2, sc(5, n)).reshape(cfg.batches, -1).mean(axis=1)
    emp = float(np.var(np.arctan2(p, q))) * cfg.batch_size
    target = phase.indirect_variance("dephased", cfg.alpha, cfg.sigma).variance
    checks["batch_estimator"] = {"scaled_variance": emp, "target": target,
                                 "relative_error": abs(emp - target) / target,
                                 "pass": abs(emp - target) / target < 0.1}

    # vacuum heterodyne phase is uniform
    vac = mc.sample_heterodyne(GaussianMixture.single(gs.vacuum()), sc(6))
    counts = np.histogram(vac, bins=edges)[0]
    chi2 = numerics.chi2_statistic(counts, np.full(cfg.bins, len(vac) / cfg.bins))
    pval = numerics.chi2_pvalue(chi2, cfg.bins - 1)
    checks["vacuum_uniform"] = {"chi2": chi2, "p_value": pval, "pass": pval > 0.01}

    # empirical FI of a coherent probe at the p quadrature
    coh = GaussianMixture.single(gs.coherent(cfg.alpha))
    f_emp = mc.empirical_fi(coh, 0.0, math.pi / 2, 1e-2, sc(7))
    f_ana = est.gaussian_fisher(*_single_marginal(coh, math.pi / 2))
    checks["empirical_fisher"] = {"empirical": f_emp, "analytic": f_ana,
                                  "relative_error": abs(f_emp - f_ana) / f_ana,
                                  "pass": abs(f_emp - f_ana) / f_ana < 0.1}

    return {"rng": {"algorithm": mc.RNG_ALGORITHM, "seed": cfg.seed},
            "checks": checks, "all_pass": all(c["pass"] for c in checks.values())}


def _single_marginal(mix: GaussianMixture, phi: float) -> tuple[float, float, float]:
    mu, var, dmu, dvar = est.HomodyneModel(mix, 0.0, phi).marginals()
    return float(dmu[0]), float(var[0]), float(dvar[0])


def bin_masses(dist: phase.PhaseDistribution, edges: np.ndarray, order: int = 16) -> np.ndarray:
    """Probability of each histogram bin under a phase density."""
    rule = numerics.gauss_legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    pts = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes
    return 0.5 * (edges[1:] - edges[:-1]) * (dist(pts.ravel()).reshape(pts.shape) @ rule.weights)


# ---------------------------------------------------------------------------
# Entry point

COMMANDS = {
    "opo-moments": cmd_opo_moments,
    "phase-dist": cmd_phase_dist,
    "hwhm-map": cmd_hwhm_map,
    "thresholds": cmd_thresholds,
    "indirect": cmd_indirect,
    "fisher": cmd_fisher,
    "noisy-fisher": cmd_noisy_fisher,
    "mc-validate": cmd_mc_validate,
}
SIBLING = {"hwhm-map": "_by_d", "fisher": "_phi_scan"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opo-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int)
        p.add_argument("--nodes", type=int)
        p.add_argument("--grid", type=int)
    return parser


def sibling_path(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix + out.suffix)


def _write(text: str, path: Optional[Path]):
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def run(command: str, cfg: RunConfig, out: Optional[Path]) -> None:
    result = COMMANDS[command](cfg)
    if isinstance(result, dict):
        _write(json_document(cfg, result), out)
    elif isinstance(result, tuple):
        main_table, extra = result
        _write(main_table.to_csv(), out)
        if out is not None:
            _write(extra.to_csv(), sibling_path(out, SIBLING[command]))
    else:
        _write(result.to_csv(), out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load(args.config).with_overrides(seed=args.seed, nodes=args.nodes,
                                                      grid=args.grid)
        threads()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output_path
    try:
        run(args.command, cfg, Path(out) if out else None)
    except (ConfigError, RangeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OpoLabError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
