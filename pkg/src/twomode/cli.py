"""Command line entry point.

One parameter file (INI) plus per-subcommand flags; flags win.  Every
run writes ``<name>.manifest.json`` (resolved configuration + content
hash) before any data file.  Exit codes: 0 success, 2 configuration
error, 3 numerical/domain error, 4 I/O error.
"""

import argparse
import math
import sys
from dataclasses import replace
from importlib import resources

import numpy as np

from . import analysis, config, io
from .controller import (CycleConfig, SlowFlowPlant, controller_statistics,
                         stabilize_mode1, stabilize_mode2)
from .errors import (BelowThreshold, ConfigError, InsufficientResolution,
                     TooShort, TwoModeError, ZeroStateStable)
from .fullmodel import (full_model_oracle, leading_order_params, phase_slope,
                        steady_amplitude)
from .params import coupling_g, derive_constants, stationary_state
from .slowflow import integrate_ensemble
from .stability import (build_jacobian, compute_C_spectral, eigensystem,
                        step_response)

TWO_PI = 2.0 * math.pi


def _default_config():
    return resources.files("twomode") / "data" / "device.cfg"


def _load_setup(args):
    raw = config.load_raw(args.config or _default_config())
    raw = config.apply_overrides(raw, args.override)
    if args.seed is not None:
        raw = config.apply_overrides(raw, [f"noise.seed={args.seed}"])
    return config.resolve(raw)


def _manifest(args, setup, subcommand, extra=None):
    outdir = io.resolve_outdir(args.outdir)
    name = args.name or subcommand
    digest = io.write_manifest(outdir / f"{name}.manifest.json", subcommand,
                               setup.resolved, setup.noise.seed, extra)
    return outdir, name, digest


def _dt(setup):
    dt = setup.integration["dt"]
    return None if dt == 0.0 else dt


def _traj_rows(traj, theta_f):
    for i in range(traj.t.size):
        yield (traj.t[i], traj.u1[i].real, traj.u1[i].imag,
               traj.u2[i].real, traj.u2[i].imag, theta_f)


def _write_trajectory(path, traj, theta_f, meta, fmt):
    cols = ("t", "re_u1", "im_u1", "re_u2", "im_u2", "theta_F")
    if fmt == "csv":
        io.write_csv(path.with_suffix(".csv"), cols,
                     _traj_rows(traj, theta_f), meta)
    else:
        io.write_ndjson(
            path.with_suffix(".ndjson"),
            ({c: (float(v)) for c, v in zip(cols, row)}
             for row in _traj_rows(traj, theta_f)), meta)


# ---------------------------------------------------------------- handlers

def _cmd_constants(args):
    setup = _load_setup(args)
    p = setup.params
    dc = derive_constants(p)
    vals = {"xi": dc.xi, "omega_c": np.nan, "zeta0": np.nan,
            "theta0": np.nan, "c": np.nan, "g": np.nan}
    try:
        vals.update(omega_c=dc.omega_c, zeta0=dc.zeta0, theta0=dc.theta0)
        split = coupling_g(p)
        vals.update(c=split.c, g=split.g)
    except BelowThreshold:
        pass
    outdir, name, digest = _manifest(args, setup, "constants")
    io.write_csv(outdir / f"{name}.csv", list(vals),
                 [tuple(vals.values())],
                 {"config_hash": digest, "current_a": setup.current})
    width = max(len(k) for k in vals)
    for key, value in vals.items():
        print(f"{key:<{width}}  {value!r}")
    return 0


def _cmd_steady(args):
    setup = _load_setup(args)
    ss = stationary_state(setup.params)
    dc = derive_constants(setup.params)
    outdir, name, digest = _manifest(args, setup, "steady")
    cols = ("r1_0", "r2_0", "r1_sq", "r2_sq", "delta_omega", "phi_plus_0",
            "xi", "omega_c")
    io.write_csv(outdir / f"{name}.csv", cols,
                 [(ss.r1_0, ss.r2_0, ss.r1_0 ** 2, ss.r2_0 ** 2,
                   ss.delta_omega, ss.phi_plus_0, dc.xi, dc.omega_c)],
                 {"config_hash": digest})
    print(f"r1_0 = {ss.r1_0!r} m, r2_0 = {ss.r2_0!r} m, "
          f"delta_omega/2pi = {ss.delta_omega / TWO_PI!r} Hz")
    return 0


def _cmd_sweep_detune(args):
    setup = _load_setup(args)
    wc = derive_constants(setup.params).omega_c
    grid = np.linspace(-args.span_wc * wc, args.span_wc * wc, args.n_points)
    sw = analysis.sweep_amplitude_vs_detuning(setup.params, grid)
    outdir, name, digest = _manifest(args, setup, "sweep-detune")
    rows = zip(sw.delta_f, sw.r1_sq, sw.r2_sq,
               sw.oscillating.astype(int), sw.zero_state_bistable.astype(int))
    io.write_csv(outdir / f"{name}.csv",
                 ("delta_f", "r1_sq", "r2_sq", "oscillating",
                  "zero_state_bistable"),
                 rows,
                 {"config_hash": digest, "omega_c": sw.omega_c,
                  "onset_delta_f": sw.onset_delta_f,
                  "restab_delta_f": sw.restab_delta_f})
    print(f"onset at {sw.onset_delta_f!r} rad/s, "
          f"restab at {sw.restab_delta_f!r} rad/s "
          f"(omega_c = {sw.omega_c!r})")
    return 0


def _cmd_eig(args):
    setup = _load_setup(args)
    p = setup.params
    grid_mode = args.grid_n > 0
    if grid_mode:
        dfs = TWO_PI * np.linspace(args.grid_min_hz, args.grid_max_hz,
                                   args.grid_n)
    else:
        dfs = np.array([p.delta_f])
    rows = []
    for df in dfs:
        pi = replace(p, delta_f=float(df))
        try:
            es = eigensystem(build_jacobian(pi))
            c = compute_C_spectral(pi)
        except (BelowThreshold, ZeroStateStable):
            if not grid_mode:
                raise
            # grid point outside the oscillation window: record and move on
            rows.append((df,) + (np.nan,) * 8)
            continue
        rows.append((df,
                     es.lam[0].real, es.lam[0].imag,
                     es.lam[1].real, es.lam[1].imag,
                     es.lam[2].real, es.lam[2].imag,
                     c, (1.0 - c) / 2.0))
    outdir, name, digest = _manifest(args, setup, "eig")
    io.write_csv(outdir / f"{name}.csv",
                 ("delta_f", "re_lam1", "im_lam1", "re_lam2", "im_lam2",
                  "re_lam3", "im_lam3", "c", "g"),
                 rows, {"config_hash": digest})
    last = rows[-1]
    print(f"lam3 = {float(last[5])!r}, C = {float(last[7])!r}, "
          f"g = {float(last[8])!r}")
    return 0


def _cmd_step(args):
    setup = _load_setup(args)
    dtheta = math.radians(args.dtheta_deg)
    tspan = (0.0, args.t_end) if args.t_end else None
    sr = step_response(setup.params, dtheta, tspan=tspan,
                       n_samples=args.n_samples)
    outdir, name, digest = _manifest(args, setup, "step")
    rows = zip(sr.t, sr.dphi1, sr.dphi2, sr.dr1, sr.dr2)
    io.write_csv(outdir / f"{name}.csv",
                 ("t", "dphi1", "dphi2", "dr1", "dr2"), rows,
                 {"config_hash": digest, "dtheta": dtheta, "c": sr.c,
                  "g": sr.g, "t_relax": sr.t_relax,
                  "dphi1_final": sr.dphi1_final,
                  "dphi2_final": sr.dphi2_final})
    print(f"split: dphi1 -> {sr.dphi1_final!r}, dphi2 -> {sr.dphi2_final!r} "
          f"(sum {sr.dphi1_final + sr.dphi2_final!r}, dtheta {dtheta!r})")
    return 0


def _cmd_diffuse(args):
    setup = _load_setup(args)
    itg = setup.integration
    t_end = args.t_end or itg["t_end"]
    members = args.members or itg["n_members"]
    ens = integrate_ensemble(setup.params, n_members=members,
                             noise=setup.noise, tspan=(0.0, t_end),
                             dt=_dt(setup), record_stride=itg["record_stride"])
    outdir, name, digest = _manifest(args, setup, "diffuse")
    meta = {"config_hash": digest, "seed": setup.noise.seed, "dt": ens.dt,
            "n_members": members}
    _write_trajectory(outdir / f"{name}_traj", ens.member(0),
                      setup.params.theta_f, meta, args.format)
    try:
        st = analysis.phase_diffusion_stats(ens)
    except TooShort as exc:
        print(f"stats skipped: {exc}", file=sys.stderr)
        return 0
    rows = zip(st.lags, st.var_dphi1, st.var_dphi2, st.var_dplus,
               st.var_dminus, st.rho_lags)
    io.write_csv(outdir / f"{name}_stats.csv",
                 ("lag", "var_dphi1", "var_dphi2", "var_dplus",
                  "var_dminus", "rho"),
                 rows,
                 {"config_hash": digest, "rho_longest_lag": st.rho,
                  "degenerate": st.degenerate,
                  "n_realizations": st.n_realizations})
    print(f"rho at longest lag: {st.rho!r} over {members} member(s)")
    return 0


def _cmd_stabilize(args):
    setup = _load_setup(args)
    ctl = dict(setup.controller)
    if args.mode:
        ctl["target_mode"] = args.mode
    if args.cycles:
        ctl["n_cycles"] = args.cycles
    if args.t_wait is not None:
        ctl["t_wait"] = args.t_wait
    if args.t_measure is not None:
        ctl["t_measure"] = args.t_measure
    split = coupling_g(setup.params)
    cfg = CycleConfig(t_measure=ctl["t_measure"],
                      target_mode=ctl["target_mode"], g=split.g,
                      t_wait=ctl["t_wait"], theta_limit=ctl["theta_limit"],
                      clamp=ctl["clamp"])
    plant = SlowFlowPlant(setup.params, noise=setup.noise, dt=_dt(setup))
    fn = stabilize_mode2 if cfg.target_mode == 2 else stabilize_mode1
    run = fn(plant, setup.detection, cfg, ctl["n_cycles"],
             enabled=not args.off, det_seed=ctl["det_seed"],
             theta0=math.radians(args.theta0_deg))
    stats = controller_statistics(run) if run.n_cycles >= 100 else None

    outdir, name, digest = _manifest(
        args, setup, "stabilize",
        {"target_mode": cfg.target_mode, "g": split.g,
         "enabled": not args.off})
    meta = {"config_hash": digest, "target_mode": cfg.target_mode,
            "g": split.g, "enabled": not args.off,
            "sample_period": run.sample_period,
            "n_wait_ticks": run.n_wait_ticks,
            "n_meas_ticks": run.n_meas_ticks}
    io.write_ndjson(
        outdir / f"{name}_cycles.ndjson",
        ({"p": int(i), "theta": float(run.theta[i]),
          "phi_meas": float(run.phi_meas[i]), "eps": float(run.eps[i]),
          "phi1": float(run.phi1_end[i]), "phi2": float(run.phi2_end[i]),
          "r1": float(run.r1_end[i]), "r2": float(run.r2_end[i])}
         for i in range(run.n_cycles)), meta)
    cols = ("sigma_phi", "theta_walk_rate", "predicted_walk_rate",
            "mean_eps_sq", "n_cycles", "excursions")
    if stats is not None:
        row = (stats.sigma_phi, stats.theta_walk_rate,
               stats.predicted_walk_rate, stats.mean_eps_sq,
               run.n_cycles, run.excursion_count)
    else:
        row = (np.nan, np.nan, np.nan, np.nan, run.n_cycles,
               run.excursion_count)
    io.write_csv(outdir / f"{name}_summary.csv", cols, [row], meta)
    if stats is not None:
        print(f"sigma_phi = {stats.sigma_phi!r} rad over "
              f"{run.n_cycles} cycles, {run.excursion_count} excursions")
    else:
        print(f"{run.n_cycles} cycles (too few for statistics)")
    return 0


def _cmd_spectrum(args):
    setup = _load_setup(args)
    itg = setup.integration
    t_end = args.t_end or itg["t_end"]
    ens = integrate_ensemble(setup.params, n_members=1, noise=setup.noise,
                             tspan=(0.0, t_end), dt=_dt(setup),
                             record_stride=itg["record_stride"])
    traj = ens.member(0)
    signals = {
        "phi1": lambda: traj.phi1, "phi2": lambda: traj.phi2,
        "re_u1": lambda: traj.u1.real, "re_u2": lambda: traj.u2.real,
        "u1": lambda: traj.u1, "u2": lambda: traj.u2,
    }
    x = signals[args.signal]()
    est = analysis.spectrum(x, sample_period=float(traj.t[1] - traj.t[0]),
                            nperseg=args.nperseg)
    try:
        width = analysis.linewidth(est)
    except InsufficientResolution:
        width = np.nan
    outdir, name, digest = _manifest(args, setup, "spectrum",
                                     {"signal": args.signal})
    io.write_csv(outdir / f"{name}.csv", ("freq_hz", "psd"),
                 zip(est.freq, est.psd),
                 {"config_hash": digest, "signal": args.signal,
                  "rbw_hz": est.rbw, "enbw_hz": est.enbw,
                  "parseval_ratio": est.parseval_ratio,
                  "linewidth_hz": width})
    print(f"linewidth = {width!r} Hz (rbw {est.rbw!r} Hz, "
          f"parseval {est.parseval_ratio!r})")
    return 0


def _cmd_fit_gamma(args):
    setup = _load_setup(args)
    p = setup.params
    mass1 = setup.calibration.mass_scale
    mass = mass1 if args.mode == 1 else mass1 * p.g12 / p.g21
    omega = p.omega1 if args.mode == 1 else p.omega2
    synthetic = args.points is None
    if synthetic:
        amp_sq = np.linspace(1e-18, 1e-17, 10)
        domega = analysis.GAMMA_DISPERSIVE_REF * amp_sq / (4 * mass * omega)
    else:
        data = np.loadtxt(args.points, delimiter=",", comments="#",
                          skiprows=args.skiprows)
        if data.ndim != 2 or data.shape[1] < 2:
            raise ConfigError("points file needs two columns: amp_sq, domega")
        amp_sq, domega = data[:, 0], data[:, 1]
    fit = analysis.fit_dispersive_coupling(amp_sq, domega, mass, omega)
    outdir, name, digest = _manifest(args, setup, "fit-gamma",
                                     {"mode": args.mode,
                                      "synthetic": synthetic})
    io.write_csv(outdir / f"{name}.csv",
                 ("gamma", "slope", "residual_rms", "n_points"),
                 [(fit.gamma, fit.slope, fit.residual_rms, fit.n_points)],
                 {"config_hash": digest,
                  "gamma_ref": analysis.GAMMA_DISPERSIVE_REF,
                  "ratio_to_ref": fit.gamma / analysis.GAMMA_DISPERSIVE_REF,
                  "synthetic": synthetic})
    print(f"gamma = {fit.gamma!r} "
          f"({fit.gamma / analysis.GAMMA_DISPERSIVE_REF!r} of reference)")
    return 0


def _cmd_lambda3_sweep(args):
    setup = _load_setup(args)
    currents = np.linspace(args.current_min_a, args.current_max_a,
                           args.n_currents)
    sw = analysis.sweep_lambda3_vs_pump(setup.params, setup.calibration,
                                        currents,
                                        delta_f=TWO_PI * args.delta_f_hz)
    outdir, name, digest = _manifest(args, setup, "lambda3-sweep")
    rows = zip(sw.currents, sw.xi, sw.lam3, sw.below_threshold.astype(int))
    io.write_csv(outdir / f"{name}.csv",
                 ("current_a", "xi", "lam3", "below_threshold"), rows,
                 {"config_hash": digest, "delta_f": sw.delta_f})
    n_ok = int((~sw.below_threshold).sum())
    print(f"{n_ok}/{sw.currents.size} points above threshold")
    return 0


def _cmd_oracle_check(args):
    setup = _load_setup(args)
    fp = setup.fullmodel
    omega_f = setup.fullmodel_drive["omega_f"]
    theta_f = setup.fullmodel_drive["theta_f"]
    lead = leading_order_params(fp, omega_f, theta_f)
    ss = stationary_state(lead)
    traj = full_model_oracle(fp, (omega_f, theta_f), (0.0, args.t_end))
    r1 = steady_amplitude(traj, 1)
    r2 = steady_amplitude(traj, 2)
    s1 = phase_slope(traj, 1)
    s2 = phase_slope(traj, 2)
    err1 = abs(r1 - ss.r1_0) / ss.r1_0
    err2 = abs(r2 - ss.r2_0) / ss.r2_0
    # demod frames are (omega1, omega2 + Delta_F): residual slopes must
    # cancel for the self-oscillation frequencies to sum to omega_F
    sum_residual = s1 + s2
    outdir, name, digest = _manifest(args, setup, "oracle-check")
    io.write_csv(outdir / f"{name}.csv",
                 ("r1_oracle", "r1_envelope", "r1_rel_err",
                  "r2_oracle", "r2_envelope", "r2_rel_err",
                  "freq_sum_residual", "delta_omega_envelope"),
                 [(r1, ss.r1_0, err1, r2, ss.r2_0, err2,
                   sum_residual, ss.delta_omega)],
                 {"config_hash": digest, "t_end": args.t_end,
                  "tol": args.tol})
    print(f"amplitude errors: {err1:.3%}, {err2:.3%}; "
          f"frequency-sum residual {sum_residual!r} rad/s")
    if err1 > args.tol or err2 > args.tol:
        print(f"MismatchBeyondTolerance: oracle amplitudes deviate beyond "
              f"{args.tol:.1%}: {err1:.3%}, {err2:.3%}", file=sys.stderr)
        return 3
    return 0


# ---------------------------------------------------------------- parser

def _add_common(sp):
    sp.add_argument("--config", help="parameter file (INI) or manifest JSON")
    sp.add_argument("--outdir", help="output directory "
                    f"(default ${io.OUTDIR_ENV} or cwd)")
    sp.add_argument("--name", help="output basename (default: subcommand)")
    sp.add_argument("--seed", type=int, default=None,
                    help="override the noise seed")
    sp.add_argument("-O", "--override", action="append", default=[],
                    metavar="SECTION.KEY=VALUE",
                    help="override a parameter file value")
    sp.add_argument("--format", choices=("csv", "ndjson"), default="csv",
                    help="trajectory output format")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="twomode",
        description="Simulate and analyze two parametrically coupled "
                    "self-oscillating resonator modes.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    handlers = {}

    def cmd(name, fn, **kwargs):
        sp = sub.add_parser(name, **kwargs)
        _add_common(sp)
        handlers[name] = fn
        return sp

    cmd("constants", _cmd_constants,
        help="derived operating-point constants")
    cmd("steady", _cmd_steady, help="stationary self-oscillation state")

    sp = cmd("sweep-detune", _cmd_sweep_detune,
             help="stationary amplitudes vs pump detuning")
    sp.add_argument("--n-points", type=int, default=101)
    sp.add_argument("--span-wc", type=float, default=1.8,
                    help="half-width of the grid in units of omega_c")

    sp = cmd("eig", _cmd_eig, help="linearization eigenvalues")
    sp.add_argument("--grid-min-hz", type=float, default=0.0)
    sp.add_argument("--grid-max-hz", type=float, default=0.0)
    sp.add_argument("--grid-n", type=int, default=0,
                    help="detuning grid size (0: config point only)")

    sp = cmd("step", _cmd_step, help="linear response to a pump phase step")
    sp.add_argument("--dtheta-deg", type=float, default=1.0)
    sp.add_argument("--t-end", type=float, default=None)
    sp.add_argument("--n-samples", type=int, default=2001)

    sp = cmd("diffuse", _cmd_diffuse,
             help="free-running noise ensemble and diffusion statistics")
    sp.add_argument("--t-end", type=float, default=None)
    sp.add_argument("--members", type=int, default=None)

    sp = cmd("stabilize", _cmd_stabilize, help="discrete feedback run")
    sp.add_argument("--mode", type=int, choices=(1, 2), default=None)
    sp.add_argument("--cycles", type=int, default=None)
    sp.add_argument("--t-wait", type=float, default=None)
    sp.add_argument("--t-measure", type=float, default=None)
    sp.add_argument("--theta0-deg", type=float, default=0.0)
    sp.add_argument("--off", action="store_true",
                    help="run the cycle clock without feedback")

    sp = cmd("spectrum", _cmd_spectrum, help="PSD of a trajectory signal")
    sp.add_argument("--signal", default="phi1",
                    choices=("phi1", "phi2", "re_u1", "re_u2", "u1", "u2"))
    sp.add_argument("--t-end", type=float, default=None)
    sp.add_argument("--nperseg", type=int, default=None)

    sp = cmd("fit-gamma", _cmd_fit_gamma,
             help="dispersive coupling constant from shift-vs-A^2 data")
    sp.add_argument("--points", default=None,
                    help="CSV of amp_sq,domega rows (default: exact "
                         "synthetic line at the reference gamma)")
    sp.add_argument("--mode", type=int, choices=(1, 2), default=1)
    sp.add_argument("--skiprows", type=int, default=0)

    sp = cmd("lambda3-sweep", _cmd_lambda3_sweep,
             help="slow eigenvalue vs pump current")
    sp.add_argument("--current-min-a", type=float, default=50e-6)
    sp.add_argument("--current-max-a", type=float, default=900e-6)
    sp.add_argument("--n-currents", type=int, default=18)
    sp.add_argument("--delta-f-hz", type=float, default=0.0)

    sp = cmd("oracle-check", _cmd_oracle_check,
             help="full fast-equation integration vs envelope predictions")
    sp.add_argument("--t-end", type=float, default=600.0)
    sp.add_argument("--tol", type=float, default=0.05)

    ap._handlers = handlers
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    handler = ap._handlers[args.cmd]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except TwoModeError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
