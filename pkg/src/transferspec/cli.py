"""Command-line pipeline: simulate -> estimate -> resonances -> reconstruct,
plus the analytic oracle and the estimate-vs-oracle comparison.

Each subcommand reads one JSON run configuration (``--config``) and the
stage-specific input files, writes its declared outputs plus optional
figures into the configured output directory, and finishes by writing a
manifest with checksums of every delimited/JSON output.  Exit codes:
0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from . import __version__, figures, io
from .config import RunConfig, load_config, save_config
from .eigen import (
    filter_and_sort,
    leading_eigenpairs,
    pair_and_ratio,
)
from .errors import ConfigError, TransferSpecError, ValidationError
from .hopf import simulate
from .oracle import (
    floquet_analysis,
    fp_lattice,
    phase_diffusion_analytic,
    po_lattice,
)
from .partition import sojourn_density, standardize
from .spectral import (
    ObservableVec,
    observable_mean,
    reconstruct_correlation,
    reconstruct_psd,
    sample_correlation,
    sample_psd,
    weights,
)
from .transfer import (
    common_kept_boxes,
    count_transitions,
    count_transitions_excluding,
    normalize_on,
    restrict_density,
)

_LOCK_TIMEOUT = 60.0


def _out_dir(cfg: RunConfig) -> Path:
    d = Path(cfg.io.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _checksums(out_dir: Path, names: list[str]) -> dict[str, str]:
    return {name: io.sha256_file(out_dir / name) for name in names}


def _finish(cfg, stage, outputs, timings, figs):
    out_dir = _out_dir(cfg)
    manifest = io.write_manifest(
        out_dir, cfg.io.stem, stage, cfg.to_dict(), _checksums(out_dir, outputs), timings, figs
    )
    print(f"[{stage}] wrote {', '.join(outputs)} (manifest {manifest.name})")


def cmd_simulate(cfg: RunConfig, render_figures: bool = True) -> dict:
    t0 = time.perf_counter()
    traj = simulate(cfg.hopf, cfg.sim)
    t_sim = time.perf_counter() - t0
    out_dir = _out_dir(cfg)
    name = f"{cfg.io.stem}.trajectory.csv"
    t0 = time.perf_counter()
    io.write_trajectory_csv(out_dir / name, traj)
    figs = []
    if render_figures:
        figures.plot_trajectory(traj.states, out_dir / f"{cfg.io.stem}.trajectory.png")
        figs.append(f"{cfg.io.stem}.trajectory.png")
    _finish(cfg, "simulate", [name], {"simulate": t_sim, "write": time.perf_counter() - t0}, figs)
    return {"trajectory": name}


def _estimate_matrices(cfg, traj, exclude=None):
    straj, sparams = standardize(traj)
    kwargs = {"exclude": exclude} if exclude is not None else {}
    counter = count_transitions_excluding if exclude is not None else count_transitions
    counts_a = counter(cfg.grid, straj, cfg.tau_steps, **kwargs)
    counts_b = counter(cfg.grid, straj, cfg.tau_steps + cfg.dtau_steps, **kwargs)
    kept = common_kept_boxes(counts_a, counts_b)
    tm_a = normalize_on(counts_a, kept)
    tm_b = normalize_on(counts_b, kept)
    return straj, sparams, counts_a, counts_b, tm_a, tm_b


def cmd_estimate(
    cfg: RunConfig,
    trajectory: Path,
    jackknife: int = 0,
    converge_grid: list[int] | None = None,
    converge_lag: list[int] | None = None,
    render_figures: bool = True,
) -> dict:
    out_dir = _out_dir(cfg)
    traj = io.read_trajectory_csv(trajectory)
    if abs(traj.sampling_interval - cfg.sim.sampling_interval) > 1e-9 * cfg.sim.sampling_interval:
        raise ValidationError(
            f"trajectory sampling interval {traj.sampling_interval} does not match "
            f"config {cfg.sim.sampling_interval}"
        )
    t0 = time.perf_counter()
    straj, sparams, counts_a, counts_b, tm_a, tm_b = _estimate_matrices(cfg, traj)
    density = sojourn_density(cfg.grid, straj)
    t_est = time.perf_counter() - t0

    names = {
        "density": f"{cfg.io.stem}.density.csv",
        "matrix_a": f"{cfg.io.stem}.tau.tmx",
        "matrix_b": f"{cfg.io.stem}.taudtau.tmx",
    }
    io.write_density_csv(out_dir / names["density"], density)
    io.write_matrix(out_dir / names["matrix_a"], tm_a, cfg.grid, sparams, counts_a.n_pairs)
    io.write_matrix(out_dir / names["matrix_b"], tm_b, cfg.grid, sparams, counts_b.n_pairs)
    outputs = list(names.values())

    n = len(traj)
    for j in range(jackknife):
        block = (j * n // jackknife, (j + 1) * n // jackknife)
        _, _, ca, cb, ja, jb = _estimate_matrices(cfg, traj, exclude=block)
        for tag, tm, cnt in (("tau", ja, ca), ("taudtau", jb, cb)):
            name = f"{cfg.io.stem}.jk{j}.{tag}.tmx"
            io.write_matrix(out_dir / name, tm, cfg.grid, sparams, cnt.n_pairs)
            outputs.append(name)

    if converge_grid or converge_lag:
        report = _convergence_sweeps(cfg, straj, converge_grid, converge_lag)
        name = f"{cfg.io.stem}.converge.json"
        (out_dir / name).write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
        outputs.append(name)

    figs = []
    if render_figures:
        figures.plot_density(cfg.grid, density.values, out_dir / f"{cfg.io.stem}.density.png")
        figs.append(f"{cfg.io.stem}.density.png")
    _finish(cfg, "estimate", outputs, {"estimate": t_est}, figs)
    return names


def _leading_re_parts(tm, cfg, n_eigs=10):
    pairs = leading_eigenpairs(
        tm, min(n_eigs, tm.dim - 1) if tm.dim > 1 else 1,
        tol=cfg.eigen.tol, max_restarts=cfg.eigen.max_restarts,
    )
    from .eigen import to_generator

    lams = sorted((to_generator(p.value, tm.lag) for p in pairs), key=lambda z: -z.real)
    return [z.real for z in lams[:n_eigs]]


def _convergence_sweeps(cfg, straj, grid_sizes, lag_steps_list):
    """Relative change of the leading real parts along grid / lag refinement."""
    from .partition import GridSpec
    from .transfer import normalize

    report = {}
    for key, seq in (("grid", grid_sizes), ("lag", lag_steps_list)):
        if not seq:
            continue
        res = []
        prev = None
        for value in seq:
            if key == "grid":
                grid = GridSpec(cfg.grid.lo, cfg.grid.hi, (value, value))
                counts = count_transitions(grid, straj, cfg.tau_steps)
            else:
                counts = count_transitions(cfg.grid, straj, int(value))
            tm = normalize(counts)
            parts = _leading_re_parts(tm, cfg)
            entry = {"value": int(value), "re_parts": parts}
            if prev is not None:
                k = min(len(parts), len(prev))
                # skip the zero mode in the relative-change criterion
                changes = [
                    abs(parts[j] - prev[j]) / abs(prev[j])
                    for j in range(1, k)
                    if abs(prev[j]) > 1e-12
                ]
                entry["max_rel_change"] = max(changes) if changes else None
            res.append(entry)
            prev = parts
        converged_at = next(
            (e["value"] for e in res if e.get("max_rel_change") is not None and e["max_rel_change"] < 0.01),
            None,
        )
        report[key] = {"steps": res, "first_below_1pct": converged_at}
    return report


def cmd_resonances(
    cfg: RunConfig,
    matrix_a: Path,
    matrix_b: Path,
    density: Path,
    kappa_max: float | None = None,
    render_figures: bool = True,
) -> dict:
    out_dir = _out_dir(cfg)
    tm_a, header_a = io.read_matrix(matrix_a)
    tm_b, header_b = io.read_matrix(matrix_b)
    if not np.array_equal(tm_a.kept_boxes, tm_b.kept_boxes):
        raise ValidationError("matrices do not share one kept-box set")
    dtau = tm_b.lag - tm_a.lag
    if dtau <= 0:
        raise ValidationError("matrix_b must have the larger lag")
    dens = io.read_density_csv(density)
    m = restrict_density(dens, tm_a.kept_boxes)

    t0 = time.perf_counter()
    pairs_a = leading_eigenpairs(
        tm_a, cfg.eigen.k, tol=cfg.eigen.tol, max_restarts=cfg.eigen.max_restarts
    )
    pairs_b = leading_eigenpairs(
        tm_b, cfg.eigen.k, tol=cfg.eigen.tol, max_restarts=cfg.eigen.max_restarts
    )
    rset = pair_and_ratio(
        pairs_a, pairs_b, tm_a.lag, dtau, m, quality_threshold=cfg.eigen.pairing_threshold
    )
    kmax = cfg.eigen.kappa_max if kappa_max is None else kappa_max
    filtered = filter_and_sort(rset, kmax)
    t_solve = time.perf_counter() - t0

    path = io.write_resonances(
        out_dir,
        cfg.io.stem,
        filtered,
        tm_a.kept_boxes,
        n_filtered=len(rset.resonances) - len(filtered.resonances),
    )
    outputs = [path.name]
    for idx in range(len(filtered.resonances)):
        outputs.append(f"{cfg.io.stem}.vec{idx:02d}.right.csv")
        outputs.append(f"{cfg.io.stem}.vec{idx:02d}.left.csv")
    figs = []
    if render_figures:
        figures.plot_spectrum(
            filtered.values(),
            out_dir / f"{cfg.io.stem}.spectrum.png",
            title=f"resonances (tau={tm_a.lag:g}, dtau={dtau:g})",
        )
        figs.append(f"{cfg.io.stem}.spectrum.png")
    _finish(cfg, "resonances", outputs, {"solve": t_solve}, figs)
    return {"resonances": path.name}


def cmd_reconstruct(
    cfg: RunConfig, resonances: Path, trajectory: Path, render_figures: bool = True
) -> dict:
    out_dir = _out_dir(cfg)
    rset, doc = io.read_resonances(resonances)
    kept = doc["kept_boxes"]
    if kept is None:
        raise ValidationError("resonance file carries no eigenvectors to reconstruct from")
    traj = io.read_trajectory_csv(trajectory)
    straj, _ = standardize(traj)
    dens = sojourn_density(cfg.grid, straj)
    m = restrict_density(dens, kept)

    centers = cfg.grid.box_centers()[kept]
    f = ObservableVec(values=centers[:, 0], label="x")
    t0 = time.perf_counter()
    w = weights(f, f, m, rset)
    mean_f = observable_mean(m, f)

    interval = straj.sampling_interval
    n_rows = cfg.spectral.max_lag + 1
    if cfg.spectral.t_points is not None:
        n_rows = min(n_rows, cfg.spectral.t_points)
    t_grid = np.arange(n_rows) * interval
    corr = reconstruct_correlation(rset, w, (mean_f, mean_f), t_grid)
    x_series = straj.states[:, 0]
    corr_sample = sample_correlation(x_series, x_series, cfg.spectral.max_lag)[:n_rows]

    omega, psd_sample = sample_psd(
        x_series, interval, cfg.spectral.welch_segment_len, cfg.spectral.welch_overlap
    )
    if cfg.spectral.omega_max is not None:
        mask = omega <= cfg.spectral.omega_max
        omega, psd_sample = omega[mask], psd_sample[mask]
    psd_rec = reconstruct_psd(rset, w, omega)
    t_rec = time.perf_counter() - t0

    corr_name = f"{cfg.io.stem}.correlation.csv"
    with open(out_dir / corr_name, "w") as fh:
        fh.write("t,C_reconstructed,C_sample\n")
        for t, cr, cs in zip(t_grid, corr.values, corr_sample):
            fh.write(f"{t:.17g},{cr:.17g},{cs:.17g}\n")
    psd_name = f"{cfg.io.stem}.psd.csv"
    with open(out_dir / psd_name, "w") as fh:
        fh.write("omega,freq,S_reconstructed,S_sample\n")
        for om, sr, ss in zip(omega, psd_rec.values, psd_sample):
            fh.write(f"{om:.17g},{om / (2 * np.pi):.17g},{sr:.17g},{ss:.17g}\n")

    peak_idx = int(np.argmax(psd_sample)) if psd_sample.size else 0
    summary = {
        "observable": f.label,
        "mean_f": mean_f,
        "rmse_correlation": float(np.sqrt(np.mean((corr.values - corr_sample) ** 2))),
        "rmse_psd": float(np.sqrt(np.mean((psd_rec.values - psd_sample) ** 2))),
        "psd_peak_omega_sample": float(omega[peak_idx]) if psd_sample.size else None,
        "psd_peak_height_sample": float(psd_sample[peak_idx]) if psd_sample.size else None,
        "psd_peak_omega_reconstructed": float(omega[np.argmax(psd_rec.values)]) if psd_sample.size else None,
        "imag_residual_correlation": corr.imag_residual,
        "imag_residual_psd": psd_rec.imag_residual,
    }
    summary_name = f"{cfg.io.stem}.reconstruction.json"
    (out_dir / summary_name).write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    io.update_resonance_weights(resonances, w.values)

    outputs = [corr_name, psd_name, summary_name]
    if Path(resonances).parent == out_dir:
        outputs.append(Path(resonances).name)
    figs = []
    if render_figures:
        figures.plot_correlation(t_grid, corr.values, corr_sample, out_dir / f"{cfg.io.stem}.correlation.png")
        figures.plot_psd(omega, psd_rec.values, psd_sample, out_dir / f"{cfg.io.stem}.psd.png")
        figures.plot_spectrum(
            rset.values(),
            out_dir / f"{cfg.io.stem}.spectrum_weighted.png",
            weights=w.values,
            title="resonances with spectral weights",
        )
        figs += [
            f"{cfg.io.stem}.correlation.png",
            f"{cfg.io.stem}.psd.png",
            f"{cfg.io.stem}.spectrum_weighted.png",
        ]
    _finish(cfg, "reconstruct", outputs, {"reconstruct": t_rec}, figs)
    return {"correlation": corr_name, "psd": psd_name, "summary": summary_name}


def cmd_oracle(cfg: RunConfig, render_figures: bool = True) -> dict:
    out_dir = _out_dir(cfg)
    delta = cfg.hopf.delta
    if delta == 0:
        raise ValidationError("oracle requires delta != 0 (away from the bifurcation)")
    t0 = time.perf_counter()
    if delta < 0:
        alphas = [complex(delta, cfg.hopf.gamma), complex(delta, -cfg.hopf.gamma)]
        lattice = fp_lattice(alphas, cfg.oracle.max_order)
        floquet = None
        phi_analytic = None
    else:
        lattice = po_lattice(cfg.hopf, cfg.oracle.max_n, cfg.oracle.max_l)
        fd = floquet_analysis(cfg.hopf, cfg.oracle.n_quad)
        phi_analytic = phase_diffusion_analytic(cfg.hopf)
        floquet = {
            "period": fd.period,
            "omega": fd.omega,
            "exponents": list(fd.floquet_exponents),
            "phi_numeric": fd.phi,
            "phi_analytic": phi_analytic,
        }
    doc = {
        "schema_version": io.SCHEMA_VERSION,
        "regime": lattice.regime,
        "lattice": io.lattice_to_records(lattice),
        "floquet": floquet,
    }
    name = f"{cfg.io.stem}.oracle.json"
    (out_dir / name).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    figs = []
    if render_figures:
        figures.plot_spectrum(
            np.array([], dtype=complex).reshape(0),
            out_dir / f"{cfg.io.stem}.oracle.png",
            lattice=lattice.values(),
            title=f"analytic lattice ({lattice.regime})",
        )
        figs.append(f"{cfg.io.stem}.oracle.png")
    _finish(cfg, "oracle", [name], {"oracle": time.perf_counter() - t0}, figs)
    return {"oracle": name}


def match_to_lattice(estimates: np.ndarray, lattice: np.ndarray):
    """Greedy matching by complex distance; each lattice point used once."""
    est_left = list(range(len(estimates)))
    lat_left = list(range(len(lattice)))
    matches = []
    while est_left and lat_left:
        best = None
        for i in est_left:
            for j in lat_left:
                d = abs(estimates[i] - lattice[j])
                if best is None or d < best[0]:
                    best = (d, i, j)
        _, i, j = best
        matches.append((i, j))
        est_left.remove(i)
        lat_left.remove(j)
    return matches, est_left


def cmd_compare(cfg: RunConfig, resonances: Path, oracle: Path, render_figures: bool = True) -> dict:
    out_dir = _out_dir(cfg)
    rdoc = json.loads(Path(resonances).read_text())
    odoc = json.loads(Path(oracle).read_text())
    expected_regime = "subcritical" if cfg.hopf.delta < 0 else "supercritical"
    if odoc["regime"] != expected_regime:
        raise ValidationError(
            f"oracle regime {odoc['regime']!r} does not match config delta={cfg.hopf.delta}"
        )
    est = np.array([complex(r["re_lambda"], r["im_lambda"]) for r in rdoc["resonances"]])
    lattice = np.array([complex(r["re_lambda"], r["im_lambda"]) for r in odoc["lattice"]])
    matches, unmatched = match_to_lattice(est, lattice)
    records = []
    for i, j in sorted(matches):
        lam, ref = est[i], lattice[j]
        records.append(
            {
                "estimate_index": i,
                "re_estimate": lam.real,
                "im_estimate": lam.imag,
                "l": odoc["lattice"][j]["l"],
                "n": odoc["lattice"][j]["n"],
                "re_lattice": ref.real,
                "im_lattice": ref.imag,
                "abs_error": abs(lam - ref),
                "rel_error": abs(lam - ref) / max(abs(ref), 1e-12),
            }
        )
    doc = {
        "schema_version": io.SCHEMA_VERSION,
        "regime": odoc["regime"],
        "matches": records,
        "unmatched_estimates": [
            {"estimate_index": i, "re_estimate": est[i].real, "im_estimate": est[i].imag}
            for i in unmatched
        ],
        "max_abs_error": max((r["abs_error"] for r in records), default=None),
    }
    name = f"{cfg.io.stem}.compare.json"
    (out_dir / name).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    figs = []
    if render_figures:
        figures.plot_spectrum(
            est,
            out_dir / f"{cfg.io.stem}.compare.png",
            lattice=lattice,
            title="estimated resonances vs analytic lattice",
        )
        figs.append(f"{cfg.io.stem}.compare.png")
    _finish(cfg, "compare", [name], {}, figs)
    return {"compare": name}


# ---------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transferspec",
        description="Resonance spectra of stochastic systems from reduced transfer operators",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument(
            "--no-figures", dest="render_figures", action="store_false",
            help="skip PNG rendering next to the delimited outputs",
        )
        return p

    add("simulate", "integrate the SDE and write the trajectory CSV")

    p = add("estimate", "estimate transition matrices at both lags")
    p.add_argument("--trajectory", required=True, type=Path)
    p.add_argument("--jackknife", type=int, default=0, metavar="N",
                   help="also write N leave-one-block-out matrix sets")
    p.add_argument("--converge-grid", type=_int_list, default=None, metavar="N1,N2,...",
                   help="sweep boxes-per-dimension and report eigenvalue convergence")
    p.add_argument("--converge-lag", type=_int_list, default=None, metavar="S1,S2,...",
                   help="sweep lag (in sample steps) and report eigenvalue convergence")

    p = add("resonances", "solve both matrices and form ratio resonances")
    p.add_argument("--matrix-a", required=True, type=Path)
    p.add_argument("--matrix-b", required=True, type=Path)
    p.add_argument("--density", required=True, type=Path)
    p.add_argument("--kappa-max", type=float, default=None,
                   help="override the condition-number filter threshold")

    p = add("reconstruct", "reconstruct correlation and PSD, compare to sample estimates")
    p.add_argument("--resonances", required=True, type=Path)
    p.add_argument("--trajectory", required=True, type=Path)

    add("oracle", "write the analytic lattice (and Floquet data when delta > 0)")

    p = add("compare", "match estimated resonances to the analytic lattice")
    p.add_argument("--resonances", required=True, type=Path)
    p.add_argument("--oracle", required=True, type=Path)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        lock = FileLock(str(_out_dir(cfg) / ".transferspec.lock"))
        try:
            with lock.acquire(timeout=_LOCK_TIMEOUT):
                _dispatch(args, cfg)
        except Timeout as exc:
            raise ValidationError(
                f"output directory is locked by another run: {lock.lock_file}"
            ) from exc
    except TransferSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


def _dispatch(args, cfg: RunConfig) -> None:
    if args.command == "simulate":
        cmd_simulate(cfg, args.render_figures)
    elif args.command == "estimate":
        cmd_estimate(
            cfg, args.trajectory, args.jackknife, args.converge_grid,
            args.converge_lag, args.render_figures,
        )
    elif args.command == "resonances":
        cmd_resonances(cfg, args.matrix_a, args.matrix_b, args.density,
                       args.kappa_max, args.render_figures)
    elif args.command == "reconstruct":
        cmd_reconstruct(cfg, args.resonances, args.trajectory, args.render_figures)
    elif args.command == "oracle":
        cmd_oracle(cfg, args.render_figures)
    elif args.command == "compare":
        cmd_compare(cfg, args.resonances, args.oracle, args.render_figures)
    else:  # pragma: no cover
        raise ConfigError(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
