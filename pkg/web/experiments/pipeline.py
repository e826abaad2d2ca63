"""
Experiment pipeline.

``execute`` turns a validated config into an in-memory ExperimentResult:
preparation, ensemble, sequence, counting and analysis, as far as the
experiment kind needs them. ``run_experiment`` writes the result's tables and
documents plus a manifest; ``sweep`` re-executes one config along a grid of a
single key and tabulates the headline numbers.
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
from django.conf import settings

from analysis.classical import classical_bound
from analysis.counting import CSV_HEADER as HISTOGRAM_HEADER
from analysis.counting import Histogram, empirical_snr, simulate_counts
from analysis.fidelity import INPUT_STATES
from analysis.qubit import echo_bin_fractions, simulate_qubit_experiment, window_capture
from ionensemble.emission import CSV_HEADER as EMISSION_HEADER
from ionensemble.engine import run_sequence
from ionensemble.sampling import sample_ensemble
from noisebudget.budget import (
    calibrate_branching,
    residual_inversion,
    rose_noise_comparison,
    safe_snr,
    window_noise,
)
from noisebudget.exceptions import ZeroNoise
from noisebudget.traces import population_trace
from physmodel.material import MaterialParams
from physmodel.spectra import SpectralProfile
from protocols.afc import FINESSE_RANGE, afc_efficiency, afc_optimal_efficiency
from protocols.efficiency import decay_curve, fit_decay, nlpe_efficiency
from protocols.sequences import (
    ECHO_WINDOW,
    NLPE,
    PE2,
    PulseDurations,
    Sequence,
    build_nlpe,
    build_variant,
    sequence_to_dict,
)
from specprep.spectrum import CSV_HEADER as SPECTRUM_HEADER
from specprep.spectrum import PreparedSpectrum, prepare_memory

from .artifacts import ArtifactWriter
from .config import ExperimentConfig, numeric_key
from .exceptions import ConfigInvalid

logger = logging.getLogger(__name__)

SWEEP_METRICS = ("eta", "snr", "f_avg")
# Frequencies kept from a prepared spectrum; the trench around the peak is empty.
PREPARED_WINDOW = (-1.5e6, 1.5e6)
AFC_SCAN_POINTS = 400

Table = tuple[tuple[str, ...], list[tuple]]


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    experiment: str
    summary: dict[str, Any]
    tables: dict[str, Table]
    documents: dict[str, Any]

    @property
    def summary_line(self) -> str:
        return f"{self.experiment}: {SUMMARY_LINES[self.experiment](self.summary)}"


@dataclass(frozen=True, eq=False)
class SweepResult:
    variable: str
    grid: np.ndarray
    results: list[ExperimentResult]
    metrics: tuple[str, ...]

    def rows(self) -> list[tuple]:
        return [
            (value, *(result.summary.get(metric) for metric in self.metrics))
            for value, result in zip(self.grid, self.results)
        ]


def _histogram_rows(histogram: Histogram) -> list[tuple]:
    return list(zip(histogram.bin_starts, histogram.counts))


def _with_branching(
    config: ExperimentConfig, seq: Sequence, params: MaterialParams
) -> MaterialParams:
    if not config.run["calibrate_branching"]:
        return params
    branching = calibrate_branching(seq, params, config.run["eta_control"])
    return params.with_changes(branching_e3_to_g3=branching)


def _profile(
    config: ExperimentConfig, params: MaterialParams
) -> tuple[SpectralProfile, PreparedSpectrum | None]:
    if config.run["profile"] == "prepared":
        prepared = prepare_memory(params)
        return prepared.profile(PREPARED_WINDOW), prepared
    return SpectralProfile.gaussian(config.run["profile_fwhm_khz"] * 1e3), None


def storage_sequence(config: ExperimentConfig) -> Sequence:
    """The NLPE sequence, or the comparison echo named by sequence.protocol."""
    protocol = config.sequence["protocol"]
    width = config.sequence["window_us"] * 1e-6
    if protocol == NLPE:
        return build_nlpe(
            config.timings,
            geometry=config.geometry,
            window_width=width,
            monitor_window=True,
        )
    count = 2 if protocol == PE2 else 3
    return build_variant(
        protocol,
        config.timings.as_tuple()[:count],
        geometry=config.geometry,
        window_width=width,
    )


def _run_nlpe(config: ExperimentConfig) -> ExperimentResult:
    run = config.run
    seq = storage_sequence(config)
    params = _with_branching(config, seq, config.params)
    eta_control = run["eta_control"]
    durations = PulseDurations()
    echo = seq.window(ECHO_WINDOW)
    tables: dict[str, Table] = {}
    summary: dict[str, Any] = {
        "protocol": seq.protocol_tag,
        "seed": config.seed,
        "trials": run["trials"],
        "mu": run["mu"],
        "echo_time": echo.center,
        "eta": None,
    }

    trace = population_trace(seq, params, eta_control, config.scheme)
    budget = window_noise(seq, trace, params, run["dark_counts"])
    noise = budget.total(ECHO_WINDOW)
    capture = window_capture(durations.signal_fwhm, echo.width)
    if seq.protocol_tag == NLPE:
        summary["eta"] = nlpe_efficiency(params, config.timings, eta_control)

    if run["ions"]:
        profile, prepared = _profile(config, params)
        if prepared is not None:
            spectrum = list(zip(prepared.grid, prepared.depth))
            tables["spectrum.csv"] = (SPECTRUM_HEADER, spectrum)
        ens = sample_ensemble(
            run["ions"], profile, params, config.geometry, config.seed, config.scheme
        )
        emitted = run_sequence(ens, seq, params, grid_step=run["grid_step_ns"] * 1e-9)
        for label, record in emitted.records.items():
            rows = list(zip(record.times, record.amplitude.real, record.amplitude.imag))
            tables[f"emission_{label}.csv"] = (
                EMISSION_HEADER,
                [row + (power,) for row, power in zip(rows, record.intensity)],
            )
        record = emitted.record(ECHO_WINDOW)
        # ideal controls in the ensemble; their transfer efficiency enters here
        scale = eta_control ** len(seq.control_pulses)
        summary["echo_peak_time"] = record.peak_time
        summary["eta_window_ensemble"] = record.integrated_intensity * scale

    if summary["eta"] is not None:
        eta = summary["eta"]
    else:
        eta = summary["eta_window_ensemble"] / capture

    bin_width = run["bin_width_ns"] * 1e-9
    bins = max(1, round(echo.width / bin_width))
    edges = echo.center + bin_width * (np.arange(bins + 1) - bins / 2)
    shape = echo_bin_fractions(edges, echo.center, durations.signal_fwhm)
    counts = {
        with_input: simulate_counts(
            shape,
            noise / bins,
            run["mu"] if with_input else 0.0,
            eta,
            run["trials"],
            config.seed,
            bin_edges=edges,
            stream=0 if with_input else 1,
        )
        for with_input in (True, False)
    }
    try:
        ratio, error = empirical_snr(counts[True], counts[False], edges[0], edges[-1])
    except ZeroNoise:
        logger.warning("No noise counts in the echo window; SNR is unbounded")
        ratio, error = ZeroNoise.marker, ZeroNoise.marker

    tables["histogram.csv"] = (HISTOGRAM_HEADER, _histogram_rows(counts[True]))
    tables["histogram_noinput.csv"] = (HISTOGRAM_HEADER, _histogram_rows(counts[False]))
    summary.update(
        eta_window=eta * capture,
        capture=capture,
        noise=noise,
        snr=ratio,
        snr_error=error,
        snr_expected=safe_snr(run["mu"] * eta * capture, noise),
        signal_counts=counts[True].total,
        noise_counts=counts[False].total,
    )
    documents = {
        "sequence.json": sequence_to_dict(seq),
        "budget.json": budget.to_dict(),
        "histogram.json": {
            "with_input": counts[True].metadata(),
            "without_input": counts[False].metadata(),
        },
    }
    return ExperimentResult("nlpe", summary, tables, documents)


def _run_qubit(config: ExperimentConfig) -> ExperimentResult:
    run = config.run
    storage = build_nlpe(config.timings, geometry=config.geometry)
    params = _with_branching(config, storage, config.params)
    qubit = simulate_qubit_experiment(
        params,
        config.timings,
        run["mu"],
        run["eta_control"],
        run["trials"],
        config.seed,
        delta_t=config.sequence["delta_t_us"] * 1e-6,
        phase_steps=run["phase_steps"],
    )
    report = qubit.report
    bound = classical_bound(run["mu"], run["response_prob"])
    tables: dict[str, Table] = {
        f"histogram_{state}.csv": (HISTOGRAM_HEADER, _histogram_rows(histogram))
        for state, histogram in qubit.histograms.items()
    }
    tables["fringes.csv"] = (
        ("state", "phase", "counts"),
        [
            (state, phase, int(count))
            for state in INPUT_STATES
            if state in qubit.fringes
            for phase, count in zip(*qubit.fringes[state])
        ],
    )
    summary = {
        "seed": config.seed,
        "trials": run["trials"],
        "mu": run["mu"],
        "eta": qubit.eta,
        "eta_window": qubit.eta * qubit.capture,
        "noise": qubit.noise_per_bin,
        "snr": report.snr["e"],
        "f_avg": report.f_avg,
        "f_avg_error": report.errors["avg"],
        "f_el": report.f_el,
        "f_pm": report.f_pm,
        "classical_bound": bound,
        "beats_classical": report.f_avg > bound,
    }
    documents = {
        "fidelity.json": report.to_dict(),
        "histogram.json": {
            state: histogram.metadata() for state, histogram in qubit.histograms.items()
        },
    }
    return ExperimentResult("qubit", summary, tables, documents)


def _run_decay(config: ExperimentConfig) -> ExperimentResult:
    run = config.run
    delays = 1e-6 * np.linspace(
        run["delay_start_us"], run["delay_stop_us"], run["points"]
    )
    curve = decay_curve(
        config.params, run["vary"], delays, config.timings, run["eta_control"]
    )
    fit = fit_decay(curve)
    summary = {"vary": run["vary"], "eta": fit.amplitude, **asdict(fit)}
    rows = list(zip(delays, curve.efficiency))
    tables = {"decay.csv": (("delay", "efficiency"), rows)}
    documents = {"fit.json": {"vary": run["vary"], **asdict(fit)}}
    return ExperimentResult("decay", summary, tables, documents)


def _run_rose(config: ExperimentConfig) -> ExperimentResult:
    run = config.run
    seq = build_nlpe(
        config.timings,
        geometry=config.geometry,
        window_width=config.sequence["window_us"] * 1e-6,
    )
    params = _with_branching(config, seq, config.params)
    residual = residual_inversion(run["eta_control"])
    comparison = rose_noise_comparison(params, residual, seq, run["eta_control"])
    data = {
        **asdict(comparison),
        "residual_inversion": residual,
        "rose_filterable": comparison.rose_filterable,
        "nlpe_filterable": comparison.nlpe_filterable,
    }
    eta = nlpe_efficiency(params, config.timings, run["eta_control"])
    summary = {"eta": eta, **data}
    return ExperimentResult("rose", summary, {}, {"rose.json": data})


def _run_afc(config: ExperimentConfig) -> ExperimentResult:
    d = config.params.d
    finesse, eta = afc_optimal_efficiency(d)
    low, high = FINESSE_RANGE
    grid = np.linspace(low, high, AFC_SCAN_POINTS + 1)[1:]
    summary = {
        "d": d,
        "finesse": finesse,
        "eta": eta,
        "eta_nlpe": nlpe_efficiency(
            config.params, config.timings, config.run["eta_control"]
        ),
    }
    rows = list(zip(grid, afc_efficiency(d, grid)))
    tables = {"afc.csv": (("finesse", "efficiency"), rows)}
    return ExperimentResult("afc", summary, tables, {"afc.json": summary})


def _nlpe_line(s: dict[str, Any]) -> str:
    parts = [f"{s['protocol']} echo at {s['echo_time'] * 1e6:.1f} μs"]
    if "echo_peak_time" in s:
        parts.append(f"simulated peak at {s['echo_peak_time'] * 1e6:.2f} μs")
    if s["eta"] is not None:
        parts.append(f"η = {s['eta']:.1%}")
    parts.append(f"window η = {s['eta_window']:.1%}")
    parts.append(f"noise {s['noise']:.3g}")
    parts.append(f"SNR = {s['snr']:.1f} ± {s['snr_error']:.1f}")
    return ", ".join(parts)


def _qubit_line(s: dict[str, Any]) -> str:
    return (
        f"F_avg = {s['f_avg']:.3f} ± {s['f_avg_error']:.3f} at μ = {s['mu']}, "
        f"classical bound {s['classical_bound']:.3f}"
    )


def _decay_line(s: dict[str, Any]) -> str:
    line = f"{s['vary']} fit Γ = {s['gamma'] / 1e3:.2f} kHz, η(0) = {s['eta']:.1%}"
    if s["vary"] == "tau3":
        line += f", γ = {s['gamma_opt'] / 1e3:.2f} kHz"
    return line


def _rose_line(s: dict[str, Any]) -> str:
    return (
        f"ROSE noise {s['rose_noise']:.3g} vs NLPE {s['nlpe_noise']:.3g} photons "
        f"(ratio {s['ratio']:.3g})"
    )


def _afc_line(s: dict[str, Any]) -> str:
    return f"F* = {s['finesse']:.3f}, η* = {s['eta']:.2%} (NLPE {s['eta_nlpe']:.1%})"


EXPERIMENTS: dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "nlpe": _run_nlpe,
    "qubit": _run_qubit,
    "decay": _run_decay,
    "rose": _run_rose,
    "afc": _run_afc,
}

SUMMARY_LINES: dict[str, Callable[[dict[str, Any]], str]] = {
    "nlpe": _nlpe_line,
    "qubit": _qubit_line,
    "decay": _decay_line,
    "rose": _rose_line,
    "afc": _afc_line,
}


def execute(config: ExperimentConfig) -> ExperimentResult:
    """Run the configured experiment without touching the disk."""
    logger.info(
        f"Running {config.experiment} experiment {config.name} with seed {config.seed}"
    )
    return EXPERIMENTS[config.experiment](config)


def output_directory(config: ExperimentConfig, out: Path | str | None = None) -> Path:
    """``out``, else output.directory next to the config, else the default root."""
    if out:
        return Path(out)
    if config.output["directory"]:
        return config.base_dir / config.output["directory"]
    return Path(settings.ECHO_LAB_OUTPUT_DIR) / config.name


def write_result(
    result: ExperimentResult, directory: Path | str, formats=("csv", "json")
) -> Path:
    """Write tables, documents and summary.json, then the manifest."""
    writer = ArtifactWriter(directory, formats)
    for name, (header, rows) in result.tables.items():
        writer.write_csv(name, header, rows)
    for name, data in result.documents.items():
        writer.write_json(name, data)
    summary = {"experiment": result.experiment, **result.summary}
    writer.write_json("summary.json", summary, always=True)
    return writer.write_manifest()


def run_experiment(
    config: ExperimentConfig, out: Path | str | None = None
) -> tuple[ExperimentResult, Path]:
    """
    Execute ``config`` and write its artifact bundle.

    Returns the result and the directory written.

    Raises:
        IoFailure: an artifact cannot be written
    """
    result = execute(config)
    directory = output_directory(config, out)
    write_result(result, directory, config.output["formats"])
    return result, directory


def sweep(
    config: ExperimentConfig,
    variable: str,
    grid,
    out: Path | str | None = None,
) -> tuple[SweepResult, Path]:
    """
    Execute ``config`` once per grid value of the dotted key ``variable``.

    Every point keeps the config's seed. sweep.csv holds one row per point in
    grid order with the value and whichever of η, SNR and F_avg the
    experiment reports.

    Raises:
        UnknownVariable: ``variable`` is not a numeric configuration key
        ConfigInvalid: the grid is empty or a value fails validation
    """
    numeric_key(variable)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ConfigInvalid(f"sweep: empty grid for {variable}")
    results = [execute(config.with_value(variable, float(value))) for value in grid]
    metrics = tuple(
        metric
        for metric in SWEEP_METRICS
        if any(result.summary.get(metric) is not None for result in results)
    )
    outcome = SweepResult(variable, grid, results, metrics)

    directory = output_directory(config, out)
    writer = ArtifactWriter(directory, config.output["formats"])
    writer.write_csv("sweep.csv", (variable, *metrics), outcome.rows())
    writer.write_json(
        "sweep.json",
        {
            "variable": variable,
            "experiment": config.experiment,
            "points": [
                {"value": value, **result.summary}
                for value, result in zip(grid, results)
            ],
        },
        always=True,
    )
    writer.write_manifest()
    logger.info(f"Swept {variable} over {grid.size} points into {directory}")
    return outcome, directory
