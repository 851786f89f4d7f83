"""End-to-end pipelines behind the CLI subcommands.

Each function takes a validated config plus input/output paths, runs the
pipeline, writes delimited outputs and a JSON report (plus figures unless
plotting is disabled), and returns the paths it wrote.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import baselines, covops, deconv, fileio, imaging, plots, train
from .deconv import ObservationSet
from .errors import ConfigError, DataFormatError, ParameterError
from .gp import cholesky_jittered, log_marginal_likelihood
from .kernels import (FilterSpec, KernelSpec, discretize_filter,
                      effective_support, filter_from_dict, kernel_from_dict)
from .model import GenerativeConfig, sample_joint
from .train import FitConfig, TrainableModel, fit, fit_blind


def grid_from_spec(spec):
    if "values" in spec:
        return np.asarray(spec["values"], dtype=float)
    return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))


def fit_config_from(config, seed):
    doc = dict(config.get("optimizer", {}))
    doc.setdefault("seed", seed)
    return FitConfig(**doc)


def _seed_of(config):
    return int(config.get("seed", 0))


def _plotting(config):
    return bool(config.get("plot", True))


def _read_t_y(path):
    data = fileio.read_csv(path)
    if "t" not in data or "y" not in data:
        raise DataFormatError(f"{path}: expected columns 't' and 'y', "
                              f"got {sorted(data)}")
    return data["t"], data["y"]


def _pair_kwargs(config):
    out = {}
    if "quad_nodes" in config:
        out["quad_nodes"] = int(config["quad_nodes"])
    if "quad_span" in config:
        out["quad_span"] = tuple(float(v) for v in config["quad_span"])
    return out


def cmd_sample(config, out_dir):
    """Draw (x, f, y) jointly and write the two sample CSVs."""
    out = Path(out_dir)
    cfg = GenerativeConfig(
        source=kernel_from_dict(config["kernel"]),
        filter=filter_from_dict(config["filter"]),
        t_x=grid_from_spec(config["source_grid"]),
        t_f=grid_from_spec(config["conv_grid"]),
        noise_variance=float(config.get("noise_variance", 0.0)),
        seed=_seed_of(config),
        method=config["method"],
        **_pair_kwargs(config),
    )
    draw = sample_joint(cfg)
    source_csv = out / "sample_source.csv"
    conv_csv = out / "sample_convolution.csv"
    fileio.write_csv(source_csv, [("t", cfg.t_x), ("x", draw.x)])
    fileio.write_csv(conv_csv, [("t", cfg.t_f), ("f", draw.f), ("y", draw.y),
                                ("f_std_given_x", draw.f_std_given_x)])
    written = [source_csv, conv_csv]
    if _plotting(config):
        figure = out / "sample.png"
        plots.plot_joint_sample(cfg.t_x, draw.x, cfg.t_f, draw.f, draw.y,
                                draw.f_std_given_x, figure)
        written.append(figure)
    return written


def _spectral_outputs(source, filt, freq_grid, config, out, prefix, written):
    report = deconv.recovery_diagnostic(source, filt, freq_grid,
                                        psd_tol=config.get("psd_tol"),
                                        transfer_tol=config.get("transfer_tol"))
    spectrum_csv = out / f"{prefix}_spectrum.csv"
    fileio.write_csv(spectrum_csv, [
        ("frequency", report.frequencies),
        ("psd", report.psd),
        ("transfer_magnitude", report.transfer_magnitude),
        ("suppressed", report.suppressed.astype(int)),
    ])
    written.append(spectrum_csv)
    if _plotting(config):
        figure = out / f"{prefix}_spectrum.png"
        plots.plot_spectral_report(report, figure)
        written.append(figure)
    band = report.suppressed_band()
    return {"recoverable": report.recoverable,
            "suppressed_band": list(band) if band else None,
            "suppressed_bins": int(np.sum(report.suppressed)),
            "psd_tol": report.psd_tol, "transfer_tol": report.transfer_tol}


def cmd_deconv(config, input_csv, out_dir):
    """Posterior over the source from a (t, y) CSV, plus diagnostics."""
    out = Path(out_dir)
    t, y = _read_t_y(input_csv)
    noise_variance = float(config.get("noise_variance", 0.0))
    obs = ObservationSet(t, y, noise_variance)
    source = kernel_from_dict(config["kernel"])
    filt = filter_from_dict(config["filter"])
    queries = grid_from_spec(config["query_grid"])
    post = deconv.deconvolve(obs, source, filt, config["method"], queries,
                             **_pair_kwargs(config))
    posterior_csv = out / "posterior.csv"
    fileio.write_csv(posterior_csv, [("t", queries), ("mean", post.mean),
                                     ("std", post.std)])
    written = [posterior_csv]

    pair = covops.ConvKernelPair(source, filt, config["method"], **_pair_kwargs(config))
    k_y = covops.kf_matrix(pair, obs.locations) + noise_variance * np.eye(len(obs))
    log_lik = log_marginal_likelihood(cholesky_jittered(k_y), obs.values)

    report = {"source": source.to_dict(), "filter": filt.to_dict(),
              "method": config["method"], "noise_variance": noise_variance,
              "observations": len(obs), "log_likelihood": log_lik}
    if source.dim == 1:
        freq_grid = deconv.default_freq_grid(obs.locations,
                                             int(config.get("freq_bins", 257)))
        report["diagnostic"] = _spectral_outputs(source, filt, freq_grid, config,
                                                 out, "deconv", written)
    report_json = out / "deconv_report.json"
    fileio.write_json(report_json, report)
    written.append(report_json)
    if _plotting(config):
        figure = out / "posterior.png"
        plots.plot_posterior(queries, post.mean, post.std, t, y, figure)
        written.append(figure)
    return written


def _fit_result_doc(result):
    return {"source": result.source.to_dict(), "filter": result.filter.to_dict(),
            "noise_variance": result.noise_variance,
            "log_likelihood": result.log_likelihood,
            "iterations": result.iterations,
            "restart_index": result.restart_index,
            "evaluations": result.evaluations,
            "trace": [float(v) for v in result.trace]}


def cmd_train(config, input_csv, out_dir):
    """Fit hyperparameters (or a blind filter) and write the fit + posterior."""
    out = Path(out_dir)
    t, y = _read_t_y(input_csv)
    seed = _seed_of(config)
    fit_cfg = fit_config_from(config, seed)
    if config["mode"] == "blind":
        obs = ObservationSet(t, y, 0.0)
        result = fit_blind(obs, config["source_family"], int(config["taps"]),
                           tuple(config["span"]), fit_cfg,
                           frequency_init=config.get("frequency_init"))
        method = covops.DISCRETE_SUM
        pair_kwargs = {}
    else:
        model = TrainableModel(
            source=kernel_from_dict(config["kernel"]),
            filter=filter_from_dict(config["filter"]),
            noise_variance=float(config.get("noise_variance", 0.0)),
            free_source=frozenset(config.get("free_source", [])),
            free_filter=frozenset(config.get("free_filter", [])),
            free_noise=bool(config.get("free_noise", True)),
            method=config["method"], **_pair_kwargs(config))
        obs = ObservationSet(t, y, model.noise_variance)
        result = fit(obs, model, fit_cfg)
        method = config["method"]
        pair_kwargs = _pair_kwargs(config)

    fit_json = out / "fit_report.json"
    fileio.write_json(fit_json, _fit_result_doc(result))
    queries = grid_from_spec(config["query_grid"])
    post_obs = ObservationSet(t, y, result.noise_variance)
    post = deconv.deconvolve(post_obs, result.source, result.filter, method,
                             queries, **pair_kwargs)
    posterior_csv = out / "posterior.csv"
    fileio.write_csv(posterior_csv, [("t", queries), ("mean", post.mean),
                                     ("std", post.std)])
    written = [fit_json, posterior_csv]
    if _plotting(config):
        trace_png = out / "trace.png"
        plots.plot_trace(result.trace, trace_png)
        posterior_png = out / "posterior.png"
        plots.plot_posterior(queries, post.mean, post.std, t, y, posterior_png)
        written.extend([trace_png, posterior_png])
    return written


def _read_image(path):
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return fileio.read_pgm(path)
    return fileio.read_matrix_csv(path)


def _image_filter(config, seed):
    doc = config["filter"]
    if "name" in doc:
        return imaging.builtin_filter(doc["name"], seed=seed)
    filt = filter_from_dict(doc)
    if not (filt.is_discrete and filt.dim == 2):
        raise ConfigError("image filter must be a discrete 2D grid")
    return filt


def _image_kernel_model(config, obs, filt, blind):
    kernel = kernel_from_dict(config["kernel"])
    if kernel.dim != 2:
        raise ConfigError("image kernel must be 2D (isotropic SE)")
    if blind:
        source = KernelSpec.se(1.0, kernel.lengthscale, dim=2)
        return TrainableModel(source=source, filter=filt,
                              noise_variance=max(obs.noise_variance, 1e-6),
                              free_source=frozenset({"lengthscale"}),
                              free_filter=frozenset({"weights"}),
                              free_noise=True, method=covops.DISCRETE_SUM)
    return TrainableModel(source=kernel, filter=filt,
                          noise_variance=max(obs.noise_variance, 1e-6),
                          free_source=frozenset({"sigma", "lengthscale"}),
                          free_filter=frozenset(), free_noise=True,
                          method=covops.DISCRETE_SUM)


def _reconstruct(obs, source, filt, shape, noise_variance):
    # the prior is zero-mean: centre the observations, then restore the
    # level through the filter's DC gain
    level = float(np.mean(obs.values))
    dc_gain = float(np.sum(filt.weights))
    source_level = level / dc_gain if abs(dc_gain) > 1e-9 else 0.0
    centered = ObservationSet(obs.locations, obs.values - level, noise_variance,
                              grid_shape=obs.grid_shape, grid_mask=obs.grid_mask)
    coords = imaging.pixel_grid(shape)
    post = deconv.deconvolve(centered, source, filt, covops.DISCRETE_SUM, coords)
    filled = deconv.predict_convolution(centered, source, filt,
                                        covops.DISCRETE_SUM, coords)
    return (post.mean.reshape(shape) + source_level,
            filled.mean.reshape(shape) + level)


def cmd_image(config, input_image, out_dir):
    """Blur + corrupt an image, reconstruct it, and sweep observed fractions."""
    out = Path(out_dir)
    truth = _read_image(input_image)
    seed = _seed_of(config)
    filt = _image_filter(config, seed)
    noise_sigma = float(config["noise_sigma"])
    main_fraction = float(config["observed_fraction"])
    fractions = sorted(set(float(f) for f in config.get("fractions", []))
                       | {main_fraction})
    blind = bool(config.get("blind", False))
    fit_kernel = bool(config.get("fit_kernel", True))
    wiener_ratio = float(config.get("wiener_noise_to_signal", 0.01))
    fit_cfg = fit_config_from(config, seed)

    blurred, noisy, mask, _ = imaging.corrupt_image(truth, filt, noise_sigma,
                                                    main_fraction, seed)
    wiener = baselines.wiener_deconv_image(
        blurred, filt.weights.reshape(filt.grid_shape), wiener_ratio)
    wiener_mse = float(np.mean((wiener - truth) ** 2))

    def run_fraction(fraction):
        _, _, frac_mask, obs = imaging.corrupt_image(truth, filt, noise_sigma,
                                                     fraction, seed)
        centered = ObservationSet(obs.locations,
                                  obs.values - float(np.mean(obs.values)),
                                  obs.noise_variance, grid_shape=obs.grid_shape,
                                  grid_mask=obs.grid_mask)
        filter_used = filt
        if blind:
            model = _image_kernel_model(config, obs, filt, blind=True)
            result = fit(centered, model, fit_cfg)
            source = result.source
            filter_used = result.filter
            noise_variance = result.noise_variance
            fitted = _fit_result_doc(result)
        elif fit_kernel:
            model = _image_kernel_model(config, obs, filt, blind=False)
            result = fit(centered, model, fit_cfg)
            source = result.source
            noise_variance = result.noise_variance
            fitted = _fit_result_doc(result)
        else:
            source = kernel_from_dict(config["kernel"])
            noise_variance = obs.noise_variance
            fitted = None
        recon, filled = _reconstruct(obs, source, filter_used, truth.shape,
                                     noise_variance)
        return {"fraction": fraction, "mask": frac_mask, "recon": recon,
                "filled": filled, "mse": float(np.mean((recon - truth) ** 2)),
                "fitted": fitted}

    sweep = [run_fraction(fraction) for fraction in fractions]
    main = next(row for row in sweep if row["fraction"] == main_fraction)

    observed_view = np.where(mask, noisy, np.nan)
    written = []
    for name, grid in (("image_convolved", blurred),
                       ("image_observed", observed_view),
                       ("image_gpdc", main["recon"]),
                       ("image_filled", main["filled"]),
                       ("image_wiener", wiener)):
        csv_path = out / f"{name}.csv"
        fileio.write_matrix_csv(csv_path, grid)
        written.append(csv_path)
        if not np.isnan(grid).any():
            pgm_path = out / f"{name}.pgm"
            fileio.write_pgm(pgm_path, np.clip(grid, 0.0, 1.0))
            written.append(pgm_path)
    mask_csv = out / "image_mask.csv"
    fileio.write_matrix_csv(mask_csv, mask.astype(float))
    written.append(mask_csv)

    sweep_csv = out / "image_sweep.csv"
    fileio.write_csv(sweep_csv, [
        ("fraction", [row["fraction"] for row in sweep]),
        ("mse_gpdc", [row["mse"] for row in sweep]),
        ("mse_wiener", [wiener_mse] * len(sweep)),
    ])
    written.append(sweep_csv)

    report = {"filter": filt.to_dict(), "noise_sigma": noise_sigma,
              "observed_fraction": main_fraction,
              "observed_pixels": int(mask.sum()),
              "blind": blind, "fit_kernel": fit_kernel,
              "wiener_noise_to_signal": wiener_ratio,
              "mse_wiener": wiener_mse,
              "sweep": [{"fraction": row["fraction"], "mse_gpdc": row["mse"],
                         "fitted": row["fitted"]} for row in sweep]}
    report_json = out / "image_report.json"
    fileio.write_json(report_json, report)
    written.append(report_json)

    if _plotting(config):
        panels_png = out / "image_panels.png"
        plots.plot_image_panels([
            ("truth", truth), ("convolved", blurred),
            ("observed", np.where(mask, noisy, np.nanmin(noisy))),
            ("reconstruction", main["recon"]), ("wiener", wiener)], panels_png)
        sweep_png = out / "image_sweep.png"
        plots.plot_fraction_sweep([row["fraction"] for row in sweep],
                                  [("gpdc", [row["mse"] for row in sweep]),
                                   ("wiener (complete f)", [wiener_mse] * len(sweep))],
                                  sweep_png)
        written.extend([panels_png, sweep_png])
    return written


def filter_taps_for_grid(filt: FilterSpec, step):
    """Masses of the filter on a uniform grid, as a UniformSignal.

    Continuous filters are discretized with cell width equal to the grid
    step (midpoints land exactly on grid times); discrete filters must
    already sit on the grid.
    """
    if filt.is_discrete:
        if filt.dim != 1:
            raise ParameterError("grid filters must be 1D here")
        offsets = filt.locations / step
        nearest = np.rint(offsets)
        if np.max(np.abs(offsets - nearest)) > 1e-6:
            raise ParameterError("discrete filter locations are not grid-aligned")
        lo, hi = int(nearest.min()), int(nearest.max())
        values = np.zeros(hi - lo + 1)
        values[(nearest - lo).astype(int)] = filt.weights
        return baselines.UniformSignal(values, step, origin=lo * step)
    half_cells = max(int(np.ceil(effective_support(filt) / step - 0.5)), 0)
    m = 2 * half_cells + 1
    span = ((-half_cells - 0.5) * step, (half_cells + 0.5) * step)
    taps = discretize_filter(filt, m, span)
    return baselines.UniformSignal(taps.weights, step, origin=-half_cells * step)


def cmd_baseline(config, input_csv, out_dir):
    """FFT deconvolution baselines over a uniformly gridded (t, y) CSV."""
    out = Path(out_dir)
    t, y = _read_t_y(input_csv)
    steps = np.diff(t)
    if t.size < 2 or np.max(np.abs(steps - steps[0])) > 1e-6 * abs(steps[0]):
        raise DataFormatError("baselines need a uniform time grid")
    signal = baselines.UniformSignal(y, float(steps[0]), origin=float(t[0]))
    taps = filter_taps_for_grid(filter_from_dict(config["filter"]), signal.step)
    method = config["method"]
    columns = [("t", t)]
    report = {"filter": config["filter"], "method": method}
    if method in ("wiener", "both"):
        ratio = float(config.get("noise_to_signal", 0.01))
        wiener = baselines.wiener_deconv(signal, taps, ratio)
        columns.append(("wiener", wiener.values))
        report["noise_to_signal"] = ratio
    if method in ("inverse_ft", "both"):
        inverse = baselines.inverse_ft_deconv(signal, taps, eps=config.get("eps"))
        columns.append(("inverse_ft", inverse.values))
    baseline_csv = out / "baseline.csv"
    fileio.write_csv(baseline_csv, columns)
    report_json = out / "baseline_report.json"
    fileio.write_json(report_json, report)
    written = [baseline_csv, report_json]
    if _plotting(config):
        figure = out / "baseline.png"
        plots.plot_signal_overlay(t, [("observations", y)]
                                  + [(name, vals) for name, vals in columns[1:]],
                                  figure)
        written.append(figure)
    return written


def _signal_from_csv(path, step_override=None):
    data = fileio.read_csv(path)
    names = list(data)
    value_col = names[-1]
    values = data[value_col]
    step = 1.0
    if "t" in data and len(names) > 1:
        value_col = next(name for name in names if name != "t")
        values = data[value_col]
        diffs = np.diff(data["t"])
        if diffs.size and np.max(np.abs(diffs - diffs[0])) <= 1e-6 * abs(diffs[0]):
            step = float(diffs[0])
    if step_override is not None:
        step = float(step_override)
    return baselines.UniformSignal(values, step)


def cmd_evaluate(truth_csv, estimate_csv, config, out_dir):
    """Table-style metrics between a truth CSV and an estimate CSV."""
    out = Path(out_dir)
    truth = _signal_from_csv(truth_csv, config.get("step"))
    estimate = _signal_from_csv(estimate_csv, config.get("step"))
    if len(truth) != len(estimate):
        raise DataFormatError(f"signal lengths differ: {len(truth)} vs {len(estimate)}")
    result = baselines.metrics(truth, estimate, align=bool(config.get("align", False)))
    metrics_json = out / "metrics.json"
    fileio.write_json(metrics_json, result)
    written = [metrics_json]
    if _plotting(config):
        psd_truth = baselines.periodogram(truth)
        psd_est = baselines.periodogram(estimate)
        figure = out / "metrics_psd.png"
        plots.plot_psd_overlay(psd_truth.frequencies,
                               [("truth", psd_truth.power),
                                ("estimate", psd_est.power)], figure)
        written.append(figure)
    return written


def cmd_diagnose(config, out_dir):
    """Frequency-domain recoverability report for a kernel/filter pair."""
    out = Path(out_dir)
    source = kernel_from_dict(config["kernel"])
    filt = filter_from_dict(config["filter"])
    freq_grid = np.linspace(0.0, float(config["freq_max"]),
                            int(config.get("freq_bins", 257)))
    written = []
    summary = _spectral_outputs(source, filt, freq_grid, config, out,
                                "diagnose", written)
    summary.update({"source": source.to_dict(), "filter": filt.to_dict()})
    report_json = out / "diagnose_report.json"
    fileio.write_json(report_json, summary)
    written.append(report_json)
    return written
