"""Command-line driver: every command writes CSV files plus a run manifest.

Exit codes: 0 success, 2 configuration error, 3 convergence failure,
4 numerical failure.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np
import scipy

from . import __version__, config, decomp, gaussian, measure, nongauss, pipeline, stretch
from .model import ConfigError, build_coupling

EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_NUMERICAL = 4

CONVERGENCE_ERRORS = (gaussian.ConvergenceError, measure.WignerError)
NUMERICAL_ERRORS = (nongauss.EvolutionError, decomp.DecompositionError,
                    np.linalg.LinAlgError, FloatingPointError)


@dataclass
class RunManifest:
    """Record of one command: resolved configuration, versions and outputs."""

    command: str
    config: dict
    versions: dict = field(default_factory=lambda: {
        "artifact": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
        "python": platform.python_version()})
    determinism: str = "no random numbers are drawn; identical configs give identical files"
    outputs: list = field(default_factory=list)
    timing_s: float = 0.0
    notes: dict = field(default_factory=dict)

    def add(self, path: Path) -> None:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.outputs.append({"file": path.name, "sha256": digest})

    def write(self, out: Path) -> Path:
        path = out / f"{self.command}_manifest.json"
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True, default=str))
        return path


class Context:
    def __init__(self, command: str, cfg: dict, out: Path, figures: bool):
        self.cfg = cfg
        self.out = out
        self.figures = figures
        self.manifest = RunManifest(command, cfg)
        self.t0 = time.perf_counter()
        out.mkdir(parents=True, exist_ok=True)

    def write_csv(self, name: str, header, rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for row in rows:
                wr.writerow([_fmt(v) for v in row])
        self.manifest.add(path)
        return path

    def write_grid(self, name: str, grid: measure.WignerGrid) -> Path:
        path = self.out / name
        grid.to_csv(path)
        self.manifest.add(path)
        if self.figures:
            from . import figures
            self.manifest.add(figures.wigner_png(grid, path.with_suffix(".png")))
        return path

    def finish(self) -> None:
        self.manifest.timing_s = round(time.perf_counter() - self.t0, 3)
        self.manifest.write(self.out)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return v


def _resolve(opts: dict) -> dict:
    cfg = config.load(opts.get("config_path"))
    upd = {
        "eta_signal": opts.get("eta_s"), "eta_idler": opts.get("eta_i"), "eta_pump": opts.get("eta_p"),
        "q_int_signal": opts.get("qint_s"), "q_int_idler": opts.get("qint_i"),
        "q_int_pump": opts.get("qint_p"), "pulse_duration_ns": opts.get("pulse_ns"),
        "n_k": opts.get("nk"), "half_span_linewidths": opts.get("span"),
        "fock_cutoff": opts.get("fock_cutoff"), "nongauss_dt_scaled": opts.get("dt"),
        "threads": opts.get("threads"),
    }
    if opts.get("energies"):
        upd["energies_pJ"] = config.parse_list(opts["energies"])
    if opts.get("supermodes"):
        upd["supermodes"] = config.parse_list(opts["supermodes"], int, 2)
    cfg = config.merge(cfg, upd)
    config.params(cfg)  # validate early
    return cfg


def common_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML config file."),
        click.option("--out", "out", type=click.Path(file_okay=False), default="out", show_default=True,
                     help="Output directory."),
        click.option("--energies", help="Comma-separated pump energies in pJ."),
        click.option("--eta-s", type=float, help="Signal escape efficiency."),
        click.option("--eta-i", type=float, help="Idler escape efficiency."),
        click.option("--eta-p", type=float, help="Pump escape efficiency."),
        click.option("--qint-s", type=float, help="Signal intrinsic Q."),
        click.option("--qint-i", type=float, help="Idler intrinsic Q."),
        click.option("--qint-p", type=float, help="Pump intrinsic Q."),
        click.option("--pulse-ns", type=float, help="Pump pulse duration in ns."),
        click.option("--nk", type=int, help="Grid points per signal/idler channel."),
        click.option("--span", type=float, help="Grid half-span in half-linewidths."),
        click.option("--fock-cutoff", type=int, help="Fock cutoff per supermode."),
        click.option("--supermodes", help="Retained supermodes as M,L."),
        click.option("--dt", type=float, help="Non-Gaussian step (scaled units)."),
        click.option("--threads", type=int, help="Worker threads for sweeps."),
        click.option("--figures/--no-figures", default=False, help="Also write PNG figures."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _run(command: str, body, opts: dict) -> None:
    """Resolve the configuration, echo it, run ``body`` and map failures to exit codes."""
    try:
        cfg = _resolve(opts)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(config.dump(cfg))
    ctx = Context(command, cfg, Path(opts["out"]), opts.get("figures", False))
    try:
        body(ctx)
    except (ConfigError, nongauss.TruncationError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except CONVERGENCE_ERRORS as exc:
        click.echo(f"convergence failure: {exc}", err=True)
        sys.exit(EXIT_CONVERGENCE)
    except NUMERICAL_ERRORS as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    ctx.finish()
    click.echo(f"wrote {len(ctx.manifest.outputs)} files to {ctx.out}")


def _sweep(ctx: Context, point):
    """Evaluate ``point(energy)`` for each energy; failures become error rows."""
    energies = list(ctx.cfg["energies_pJ"])

    def safe(e):
        try:
            return point(e), ""
        except (ConfigError,) + CONVERGENCE_ERRORS + NUMERICAL_ERRORS as exc:
            return None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, int(ctx.cfg["threads"]))) as pool:
        return energies, list(pool.map(safe, energies))


def _trunc(cfg: dict) -> nongauss.Truncation:
    m, l = cfg["supermodes"]
    return nongauss.Truncation(int(m), int(l), int(cfg["fock_cutoff"]))


def _grid_spec(cfg: dict, **kw) -> measure.GridSpec:
    base = dict(chi_points=int(cfg["chi_points"]), chi_extent=float(cfg["chi_extent"]),
                out_points=int(cfg["wigner_points"]), out_extent=float(cfg["wigner_extent"]))
    base.update(kw)
    return measure.GridSpec(**base)


@click.group()
@click.version_option(__version__)
def main():
    """Pump-depleted down-conversion in lossy microrings."""


@main.command("squeeze-sweep")
@common_options
def squeeze_sweep(**opts):
    """Optimal homodyne squeezing and anti-squeezing versus pump energy."""
    def body(ctx):
        cfg = ctx.cfg

        def point(e):
            res = pipeline.run_gaussian(config.params(cfg, e), cfg["gauss_dt_scaled"])
            hom = res.homodyne()
            r1 = float(res.joint().r[0])
            ana = measure.analytic_min_noise(r1, cfg["eta_signal"], cfg["eta_idler"])
            return hom.squeezing_db, hom.antisqueezing_db, float(measure.to_db(ana)), r1

        energies, results = _sweep(ctx, point)
        rows = [(e,) + (vals if vals else (np.nan,) * 4) + (err,)
                for e, (vals, err) in zip(energies, results)]
        path = ctx.write_csv("squeeze_sweep.csv", ["energy_pJ", "squeezing_dB", "antisqueezing_dB",
                                                   "analytic_dB", "r1", "error"], rows)
        if ctx.figures:
            from . import figures
            ctx.manifest.add(figures.sweep_png(path, ["squeezing_dB", "antisqueezing_dB"], "dB"))
    _run("squeeze_sweep", body, opts)


@main.command("efficiency")
@common_options
def efficiency(**opts):
    """Photon number, conversion efficiency, depletion and first-order residual norm."""
    def body(ctx):
        cfg = ctx.cfg

        def point(e):
            res = pipeline.run_gaussian(config.params(cfg, e), cfg["gauss_dt_scaled"], dyson=True)
            return res.signal_photons, res.efficiency, res.depletion, res.dyson.norm1

        energies, results = _sweep(ctx, point)
        rows = [(e,) + (vals if vals else (np.nan,) * 4) + (err,)
                for e, (vals, err) in zip(energies, results)]
        path = ctx.write_csv("efficiency.csv", ["energy_pJ", "photon_number", "efficiency",
                                                "depletion", "dyson_norm", "error"], rows)
        if ctx.figures:
            from . import figures
            ctx.manifest.add(figures.sweep_png(path, ["efficiency", "dyson_norm"], "", logy=True))
    _run("efficiency", body, opts)


@main.command("supermodes")
@common_options
def supermodes(**opts):
    """Squeezing parameters and pump singular values at the stop time."""
    def body(ctx):
        cfg = ctx.cfg
        p = config.params(cfg)
        res = pipeline.run_gaussian(p, cfg["gauss_dt_scaled"])
        joint = res.joint()
        coupling = build_coupling(p)
        n = int(cfg["n_singular"])
        pump = decomp.pump_svd(decomp.build_L(joint, coupling, res.final.t), n, res.final.t)
        r = joint.r[:n]
        d = np.pad(np.abs(pump.d), (0, max(0, n - pump.d.size)))[:n]
        rows = [(k + 1, r[k] if k < r.size else np.nan, d[k]) for k in range(n)]
        path = ctx.write_csv("supermodes.csv", ["index", "r", "pump_singular_value"], rows)
        ctx.manifest.notes.update(r1=float(r[0]), d_ratio=float(d[1] / d[0]) if d[0] > 0 else 0.0)
        if ctx.figures:
            from . import figures
            ctx.manifest.add(figures.sweep_png(path, ["r", "pump_singular_value"], "", x="index",
                                               logy=True))
    _run("supermodes", body, opts)


def _nongauss(ctx) -> pipeline.NonGaussResult:
    cfg = ctx.cfg
    res = pipeline.run_nongauss(config.params(cfg), _trunc(cfg), cfg["gauss_dt_scaled"],
                                cfg["nongauss_dt_scaled"])
    ctx.manifest.notes.update(norm_drift=res.run.norm_drift, boundary_weight=res.run.boundary,
                              crossing_events=len(res.series.events),
                              dyson_norm=res.gauss.dyson.norm1)
    return res


def _write_ket(ctx, ket: nongauss.FockKet) -> None:
    keep = np.abs(ket.coeffs) > 1e-14
    labels = ket.basis.trunc.labels()
    rows = [tuple(int(v) for v in occ) + (c.real, c.imag)
            for occ, c in zip(ket.basis.occ[keep], ket.coeffs[keep])]
    ctx.write_csv("ket.csv", labels + ["re", "im"], rows)


@main.command("nongauss")
@common_options
def nongauss_cmd(**opts):
    """Residual-ket populations in the retained supermodes versus time."""
    def body(ctx):
        res = _nongauss(ctx)
        rows = [(t,) + tuple(p) for t, p in zip(res.run.times, res.run.populations)]
        path = ctx.write_csv("populations.csv", ["t_scaled"] + res.run.labels, rows)
        _write_ket(ctx, res.ket)
        if ctx.figures:
            from . import figures
            ctx.manifest.add(figures.sweep_png(path, res.run.labels, "photons", x="t_scaled"))
    _run("nongauss", body, opts)


@main.command("wigner")
@common_options
@click.option("--theta-pi", type=float, help="Hybrid-mode angle theta in units of pi.")
@click.option("--phi-pi", type=float, help="Hybrid-mode angle phi in units of pi.")
@click.option("--scan", default=None, help="Angle-scan grid sizes as NTHETA,NPHI.")
def wigner(theta_pi, phi_pi, scan, **opts):
    """Hybrid-mode and reduced actual-channel Wigner functions."""
    def body(ctx):
        cfg = ctx.cfg
        th = np.pi * (cfg["theta_pi"] if theta_pi is None else theta_pi)
        ph = np.pi * (cfg["phi_pi"] if phi_pi is None else phi_pi)
        res = _nongauss(ctx)
        spec = _grid_spec(cfg)
        notes = ctx.manifest.notes
        g = measure.hybrid_wigner(res.ket, measure.HybridModeSpec(th, ph), spec)
        ctx.write_grid("wigner_hybrid.csv", g)
        notes["negativity_hybrid"] = measure.negativity_volume(g)
        g = measure.mode_wigner(res.ket, measure.leading_modes(res.ket)[:2], [2 ** -0.5] * 2, spec)
        ctx.write_grid("wigner_signal_idler.csv", g)
        notes["negativity_signal_idler"] = measure.negativity_volume(g)
        g = measure.reduced_wigner_actual(res.ket, res.joint, spec=spec)
        ctx.write_grid("wigner_reduced_exact.csv", g)
        notes["negativity_reduced_exact"] = measure.negativity_volume(g)
        if cfg["eta_signal"] == cfg["eta_idler"]:
            ga = measure.reduced_wigner_actual(res.ket, eta=cfg["eta_signal"], spec=spec,
                                               approximate=True)
            ctx.write_grid("wigner_reduced_approx.csv", ga)
            notes["negativity_reduced_approx"] = measure.negativity_volume(ga)
            notes["reduced_paths_maxdiff"] = float(np.abs(g.w - ga.w).max() / np.abs(ga.w).max())
        sizes = config.parse_list(scan, int, 2) if scan else [cfg["scan_theta_points"],
                                                               cfg["scan_phi_points"]]
        if min(sizes) > 0:
            thetas = np.linspace(0, 2 * np.pi, sizes[0], endpoint=False)
            phis = np.linspace(0, 2 * np.pi, sizes[1], endpoint=False)
            out = measure.angle_scan(res.ket, thetas, phis, _grid_spec(cfg, chi_points=48))
            ctx.write_csv("angle_scan.csv", ["theta_pi", "phi_pi", "negativity"],
                          [(a / np.pi, b / np.pi, v) for a, b, v in out.table])
            notes.update(scan_theta_pi=out.theta / np.pi, scan_phi_pi=out.phi / np.pi,
                         scan_negativity=out.negativity)
    _run("wigner", body, opts)


@main.command("stretch")
@common_options
def stretch_cmd(**opts):
    """Stretched actual-channel Wigner function using a lossless reference run."""
    def body(ctx):
        cfg = ctx.cfg
        res = _nongauss(ctx)
        unitary, _ = stretch.lossless_reference(res.gauss.params, cfg["gauss_dt_scaled"])
        coeffs = stretch.optimal_stretch_lo(unitary, res.gauss.final, res.joint)
        g = stretch.stretched_wigner(res.ket, coeffs, _grid_spec(cfg))
        ctx.write_grid("wigner_stretched.csv", g)
        fit = stretch.effective_squeezing(g)
        diag = {"c_error": coeffs.target_error(), "d_max": coeffs.d_max,
                "rank_ok": coeffs.rank_ok, "r_eff": fit.r_eff, "fit_angle": fit.angle,
                "negativity": measure.negativity_volume(g),
                "constraint_residual": max(unitary.constraint_residuals()),
                "reference": unitary.ref_id}
        ctx.write_csv("stretch_diagnostics.csv", ["quantity", "value"], sorted(diag.items()))
        ctx.write_csv("stretch_coefficients.csv", ["index", "c_re", "c_im", "d_re", "d_im"],
                      [(k, c.real, c.imag, d.real, d.imag)
                       for k, (c, d) in enumerate(zip(coeffs.c, coeffs.d))])
        ctx.manifest.notes.update(diag)
    _run("stretch", body, opts)


if __name__ == "__main__":
    main()
