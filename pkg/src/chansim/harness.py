"""Deterministic Monte Carlo runner, parameter sweeps, and scenario presets.

Every run is fully determined by its config: per-trial randomness derives
from (master seed, trial index) only, so results are identical across
re-runs and worker counts, and trial batches merge by plain count
addition.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import codespace, feedback, stack as stack_mod
from .channel import (
    Burst,
    Erasure,
    ErrorModel,
    Gaussian,
    Offset,
    Omission,
    RandomFlip,
    Remap,
    SignalFrame,
    TrialRng,
    compose,
)
from .stack import (
    BitBlockCodeLayer,
    Stack,
    TransmissionAborted,
    allocation_stack,
    raw_bit_codebook,
    repetition_codebook,
    transmit,
)

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "SweepRow",
    "SweepReport",
    "build_error_model",
    "build_stack",
    "run_monte_carlo",
    "sweep",
    "scenario",
    "map_prior_comparison",
    "contextual_comparison",
    "write_csv",
    "write_json",
    "Z_99",
]

# two-sided 99% normal quantile, used for binomial confidence half-widths
Z_99 = 2.5758293035489004

# reserved sub-stream index for drawing trial messages; composed error
# models split stages from 0 upward and never reach this
_MESSAGE_STAGE = 2**32 - 1


class ConfigError(ValueError):
    """Invalid configuration, reported with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require(spec: dict, key: str, path: str):
    if key not in spec:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return spec[key]


def build_error_model(spec: dict, path: str = "error_model") -> ErrorModel:
    """Instantiate an error model from its tagged-record spec."""
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object with a 'type' tag")
    kind = _require(spec, "type", path)
    try:
        if kind == "null":
            return Offset(0.0)
        if kind == "random_flip":
            return RandomFlip(float(_require(spec, "p", path)))
        if kind == "burst":
            return Burst(float(_require(spec, "p_start", path)), int(_require(spec, "length", path)))
        if kind == "gaussian":
            return Gaussian(float(_require(spec, "sigma", path)))
        if kind == "offset":
            return Offset(float(_require(spec, "b", path)))
        if kind == "omission":
            return Omission(float(_require(spec, "p_drop", path)))
        if kind == "erasure":
            return Erasure(float(_require(spec, "p_erase", path)))
        if kind == "remap":
            book = _codebook_by_name(str(spec.get("codebook", "hamming74")), f"{path}.codebook")
            raw = _require(spec, "mapping", path)
            mapping = {_coerce_symbol(k): _coerce_symbol(v) for k, v in raw.items()}
            return Remap(book, mapping)
        if kind == "compose":
            stages = _require(spec, "stages", path)
            if not isinstance(stages, list) or not stages:
                raise ConfigError(f"{path}.stages", "expected a non-empty list")
            return compose(
                [build_error_model(s, f"{path}.stages[{i}]") for i, s in enumerate(stages)]
            )
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(path, str(err)) from err
    raise ConfigError(f"{path}.type", f"unknown error model type {kind!r}")


def _coerce_symbol(value):
    if isinstance(value, str) and value.lstrip("-").isdigit():
        return int(value)
    return value


def _codebook_by_name(name: str, path: str) -> codespace.Codebook:
    if name == "hamming74":
        return codespace.hamming74_codebook()
    if name == "raw":
        return raw_bit_codebook()
    if name.startswith("repetition"):
        try:
            k = int(name.split("-", 1)[1])
        except (IndexError, ValueError):
            raise ConfigError(path, f"bad repetition codebook name {name!r}") from None
        return repetition_codebook(k)
    raise ConfigError(path, f"unknown codebook {name!r}")


def build_stack(spec: dict, path: str = "stack") -> Stack:
    """Instantiate a stack from its spec record."""
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object with a 'type' tag")
    kind = _require(spec, "type", path)
    tolerance = spec.get("tolerance", stack_mod.PASS_RESIDUAL)
    if tolerance not in (stack_mod.PASS_RESIDUAL, stack_mod.FAIL_FAST):
        raise ConfigError(f"{path}.tolerance", f"unknown policy {tolerance!r}")
    try:
        if kind == "hamming74":
            return Stack(
                (BitBlockCodeLayer("bits", codespace.hamming74_codebook(), tolerance),),
                allocation="bottom-heavy",
            )
        if kind == "repetition":
            k = int(_require(spec, "k", path))
            return Stack(
                (BitBlockCodeLayer("bits", repetition_codebook(k), tolerance),),
                allocation="bottom-heavy",
            )
        if kind == "raw":
            return Stack(
                (BitBlockCodeLayer("bits", raw_bit_codebook(), tolerance),),
                allocation="none",
            )
        if kind == "allocation":
            return allocation_stack(str(_require(spec, "profile", path)), tolerance)
        if kind == "case1":
            return allocation_stack("balanced", tolerance)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(path, str(err)) from err
    raise ConfigError(f"{path}.type", f"unknown stack type {kind!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    """A fully deterministic run description; serializable to JSON."""

    master_seed: int
    trials: int
    stack: dict
    error_model: dict
    message_bits: int = 4
    grid: dict = field(default_factory=dict)
    out_dir: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials", "must be a positive integer")
        if self.message_bits < 1:
            raise ConfigError("message_bits", "must be a positive integer")
        build_stack(self.stack)
        build_error_model(self.error_model)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError("<config>", f"invalid JSON: {err}") from err
        known = {"master_seed", "trials", "stack", "error_model", "message_bits", "grid", "out_dir"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config field")
        for req in ("master_seed", "trials", "stack", "error_model"):
            if req not in data:
                raise ConfigError(req, "missing required field")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def with_override(self, dotted: str, value) -> "ScenarioConfig":
        data = asdict(self)
        parts = dotted.split(".")
        target = data
        for part in parts[:-1]:
            if part not in target or not isinstance(target[part], dict):
                raise ConfigError(dotted, "no such config field to sweep over")
            target = target[part]
        if parts[-1] not in target:
            raise ConfigError(dotted, "no such config field to sweep over")
        target[parts[-1]] = value
        data.pop("grid", None)
        return ScenarioConfig(grid={}, **data)


@dataclass(frozen=True)
class SweepRow:
    """Aggregated metrics for one grid point."""

    point: dict
    trials: int
    units: int
    gross_bits: int
    net_bits: int
    raw_errors: int
    residual_errors: int
    aborted: int

    @property
    def raw_rate(self) -> float:
        return self.raw_errors / self.gross_bits if self.gross_bits else 0.0

    @property
    def residual_rate(self) -> float:
        return self.residual_errors / self.units if self.units else 0.0

    @property
    def overhead_ratio(self) -> float:
        return self.gross_bits / self.net_bits if self.net_bits else math.inf

    @property
    def net_information_per_use(self) -> float:
        if not self.gross_bits:
            return 0.0
        return self.net_bits * (1.0 - self.residual_rate) / self.gross_bits

    @property
    def ci99_half_width(self) -> float:
        if not self.units:
            return 0.0
        p = self.residual_rate
        return Z_99 * math.sqrt(p * (1.0 - p) / self.units)


@dataclass(frozen=True)
class SweepReport:
    rows: tuple

    def csv_lines(self) -> list[str]:
        header = (
            "point,trials,units,gross_bits,net_bits,raw_errors,residual_errors,"
            "aborted,raw_rate,residual_rate,overhead_ratio,net_info_per_use,ci99_half_width"
        )
        lines = [header]
        for row in self.rows:
            point = ";".join(f"{k}={v!r}" for k, v in row.point.items()) or "-"
            lines.append(
                f"{point},{row.trials},{row.units},{row.gross_bits},{row.net_bits},"
                f"{row.raw_errors},{row.residual_errors},{row.aborted},"
                f"{row.raw_rate!r},{row.residual_rate!r},{row.overhead_ratio!r},"
                f"{row.net_information_per_use!r},{row.ci99_half_width!r}"
            )
        return lines


def _random_bits(rng: np.random.Generator, n: int) -> str:
    return "".join(rng.integers(0, 2, n).astype(str))


def _top_message(stack: Stack, bits: str):
    if isinstance(stack.layers[0], stack_mod.SemanticBooleanLayer):
        return tuple(int(b) for b in bits)
    return bits


def run_monte_carlo(config: ScenarioConfig, point: dict | None = None) -> SweepRow:
    """Run the configured trials and aggregate error counts.

    Raw errors count corrupted components in the bottom frame before any
    decoding; residual errors count wrong top-level units after the full
    stack decode. Aborted (fail-fast) trials count every unit as wrong.
    """
    stack = build_stack(config.stack)
    model = build_error_model(config.error_model)

    units = gross = net = raw = residual = aborted = 0
    for trial in range(config.trials):
        rng = TrialRng(config.master_seed, trial)
        bits = _random_bits(rng.stage(_MESSAGE_STAGE).generator(), config.message_bits)
        message = _top_message(stack, bits)
        net += len(bits)
        top_units = stack.layers[0].units(message)
        units += len(top_units)

        try:
            result = transmit(stack, message, model, rng, trace=True)
        except TransmissionAborted:
            aborted += 1
            residual += len(top_units)
            sent = message
            for layer in stack.layers:
                sent = layer.encode(sent)
            gross += int(sent.values.size)
            continue
        frame, corrupted = result.sent_frame, result.corrupted_frame
        gross += int(frame.values.size)
        if corrupted.values.shape == frame.values.shape:
            changed = (corrupted.values != frame.values) | (corrupted.erased & ~frame.erased)
            raw += int(changed.sum())
        else:
            raw += int(frame.values.size - corrupted.values.size)

        got_units = stack.layers[0].units(result.received)
        residual += sum(
            1
            for j in range(len(top_units))
            if j >= len(got_units) or got_units[j] != top_units[j]
        )

    return SweepRow(
        point=dict(point or {}),
        trials=config.trials,
        units=units,
        gross_bits=gross,
        net_bits=net,
        raw_errors=raw,
        residual_errors=residual,
        aborted=aborted,
    )


def sweep(config: ScenarioConfig) -> SweepReport:
    """One Monte Carlo row per grid point, in grid order."""
    if not config.grid:
        return SweepReport((run_monte_carlo(config),))
    names = list(config.grid)
    rows = []

    def expand(prefix: dict, remaining: list[str]):
        if not remaining:
            point_config = config
            for key, value in prefix.items():
                point_config = point_config.with_override(key, value)
            rows.append(run_monte_carlo(point_config, point=prefix))
            return
        name = remaining[0]
        values = config.grid[name]
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid.{name}", "expected a non-empty list of values")
        for value in values:
            expand({**prefix, name: value}, remaining[1:])

    expand({}, names)
    return SweepReport(tuple(rows))


def residual_crossing(report: SweepReport, parameter: str, threshold: float) -> float | None:
    """Parameter value where the residual rate crosses the threshold,
    linearly interpolated between the bracketing grid points."""
    prev_x = prev_y = None
    for row in report.rows:
        x = float(row.point[parameter])
        y = row.residual_rate
        if y >= threshold:
            if prev_x is None or y == prev_y:
                return x
            t = (threshold - prev_y) / (y - prev_y)
            return prev_x + t * (x - prev_x)
        prev_x, prev_y = x, y
    return None


def map_prior_comparison(
    seed: int = 7, symbols: int = 100_000, flip_p: float = 0.2, coherence: float = 0.9
) -> dict:
    """Paired comparison: prior-biased decode vs plain nearest-neighbor.

    A first-order Markov source over the Hamming(7,4) symbols (each symbol
    strongly prefers its successor) feeds the channel; a context pool is
    trained on a separate stream from the same chain and its priors bias
    each decode through the previously decoded symbol. The prior weight is
    the textbook 1/ln((1-p)/p), which converts log-priors into bit-flip
    distance units.
    """
    book = codespace.hamming74_codebook()
    n_sym = len(book.symbols)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))

    def chain(length: int, gen: np.random.Generator) -> list[int]:
        state = 0
        out = []
        u = gen.random(length)
        jump = gen.integers(0, n_sym - 1, length)
        for i in range(length):
            if u[i] < coherence:
                state = (state + 1) % n_sym
            else:
                other = int(jump[i])
                state = other if other != state else n_sym - 1
            out.append(state)
        return out

    pool = stack_mod.ContextPool(book.symbols)
    for s in chain(100_000, np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2,)))):
        pool.observe(book.symbols[s])

    sent = chain(symbols, rng)
    frame_values = book.vectors[sent]
    noise_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(3,)))
    flips = noise_rng.random(frame_values.shape) < flip_p
    received = np.where(flips, 1.0 - frame_values, frame_values)

    erased = np.zeros(received.shape, dtype=np.uint8)
    idx, dist, status = codespace.nn_decode_batch(book, received, erased)
    distances = codespace.kernels.distance_matrix(
        np.ascontiguousarray(received), erased, book.vectors
    )

    weight = 1.0 / math.log((1.0 - flip_p) / flip_p)
    penalties = np.empty((n_sym, n_sym))
    for i, sym in enumerate(book.symbols):
        priors = pool.priors(sym)
        penalties[i] = [-weight * math.log(priors[s]) for s in book.symbols]

    nn_errors = int((idx != np.asarray(sent)).sum())
    map_errors = 0
    nn_only = map_only = 0  # discordant pairs for the paired test
    prev = None
    for i in range(symbols):
        if prev is None:
            choice = int(idx[i])
        else:
            choice = int(np.argmin(distances[i] + penalties[prev]))
        nn_wrong = int(idx[i]) != sent[i]
        map_wrong = choice != sent[i]
        map_errors += map_wrong
        if nn_wrong and not map_wrong:
            nn_only += 1
        elif map_wrong and not nn_wrong:
            map_only += 1
        prev = choice
    return {
        "symbols": symbols,
        "flip_p": flip_p,
        "nn_errors": nn_errors,
        "map_errors": map_errors,
        "nn_only_wrong": nn_only,
        "map_only_wrong": map_only,
        "prior_weight": weight,
    }


def contextual_comparison(seed: int = 42, trials: int = 10_000, sigmas=(0.05, 0.1, 0.2)) -> list[dict]:
    """Paired trials: contextual octagon code vs adjacent-state baseline."""
    book = stack_mod.octagon_codebook()
    rows = []
    for sigma in sigmas:
        rng = np.random.default_rng(seed)
        bits = rng.integers(0, 2, trials)
        noise = rng.normal(0.0, sigma, (trials, 2))
        ctx_errors = adj_errors = 0
        context = "a"
        adjacent = ("a", "b")
        for i in range(trials):
            bit = int(bits[i])
            follower = book.legal_followers(context)[bit]
            sent = book.base.vector_for(follower) + noise[i]
            got_bit, got_state, _ = stack_mod.contextual_decode(
                book, context, codespace.SignalVector.from_components(sent.tolist())
            )
            if got_bit != bit:
                ctx_errors += 1
            context = got_state if got_state is not None else "a"

            sent_adj = book.base.vector_for(adjacent[bit]) + noise[i]
            out = codespace.nn_decode(book.base, codespace.SignalVector.from_components(sent_adj.tolist()))
            winner = out.symbol if out.symbol is not None else out.candidates[0]
            steps = [stack_mod._octagon_steps(winner, s) for s in adjacent]
            if steps[0] == steps[1]:
                adj_bit = -1
            else:
                adj_bit = 0 if steps[0] < steps[1] else 1
            if adj_bit != bit:
                adj_errors += 1
        rows.append(
            {"sigma": sigma, "trials": trials, "contextual_errors": ctx_errors, "adjacent_errors": adj_errors}
        )
    return rows


def write_csv(lines: list[str], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def write_json(data, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


SCENARIO_NAMES = ("case1", "driver-driven", "ram-monitor", "contextual", "feedback-affine")


def scenario(name: str, out_dir: str | Path, seed: int | None = None) -> dict:
    """Run a named preset and write its CSV/JSON artifacts.

    Returns a summary dict including the written file paths. Unknown
    names raise ConfigError.
    """
    out = Path(out_dir)
    if name == "case1":
        _, demo = stack_mod.scenario_case1(seed=0 if seed is None else seed)
        lines = ["layer,errors_in,corrected,introduced,errors_out"]
        for row in demo["report"].rows:
            lines.append(f"{row.layer},{row.errors_in},{row.corrected},{row.introduced},{row.errors_out}")
        write_csv(lines, out / "case1_report.csv")
        summary = {
            "scenario": name,
            "seed": demo["seed"],
            "flip_p": demo["flip_p"],
            "message": list(demo["message"]),
            "received": list(demo["received"]),
            "delivered_clean": demo["received"] == demo["message"],
            "token_demo": [[t, v] for t, v in demo["token_demo"]],
            "report_csv": str(out / "case1_report.csv"),
        }
        write_json(summary, out / "case1_summary.json")
        return summary
    if name == "driver-driven":
        mapping = {"a": "b", "b": "c", "c": "d", "d": "a"}
        trace = feedback.run_adapter_scenario(mapping, rounds=100, install_at=50)
        lines = ["round,lag"] + [f"{i + 1},{lag}" for i, lag in enumerate(trace)]
        write_csv(lines, out / "driver_driven_lag.csv")
        summary = {
            "scenario": name,
            "mapping": mapping,
            "install_at": 50,
            "lag_before": trace[:50],
            "lag_after": trace[50:],
            "trace_csv": str(out / "driver_driven_lag.csv"),
        }
        write_json(summary, out / "driver_driven_summary.json")
        return summary
    if name == "ram-monitor":
        rng = np.random.default_rng(13 if seed is None else seed)
        backup = rng.integers(0, 2, 8192).astype(np.uint8)
        positions = sorted(int(p) for p in rng.choice(8192, size=8, replace=False))
        memory = backup.copy()
        memory[positions] ^= 1
        patch = feedback.ram_monitor(memory, backup)
        restored = memory.copy()
        restored[list(patch.positions)] ^= 1
        lines = ["position"] + [str(p) for p in patch.positions]
        write_csv(lines, out / "ram_monitor_patch.csv")
        summary = {
            "scenario": name,
            "memory_bits": 8192,
            "injected_flips": positions,
            "patch_positions": list(patch.positions),
            "flip_bits": patch.flip_bits,
            "address_bits": patch.address_bits,
            "restored": bool(np.array_equal(restored, backup)),
            "patch_csv": str(out / "ram_monitor_patch.csv"),
        }
        write_json(summary, out / "ram_monitor_summary.json")
        return summary
    if name == "contextual":
        rows = contextual_comparison(seed=42 if seed is None else seed)
        lines = ["sigma,trials,contextual_errors,adjacent_errors"]
        for r in rows:
            lines.append(f"{r['sigma']!r},{r['trials']},{r['contextual_errors']},{r['adjacent_errors']}")
        write_csv(lines, out / "contextual_comparison.csv")
        summary = {
            "scenario": name,
            "rows": rows,
            "comparison_csv": str(out / "contextual_comparison.csv"),
        }
        write_json(summary, out / "contextual_summary.json")
        return summary
    if name == "feedback-affine":
        session = feedback.Session(5.0, feedback.Affine(1.0, 2.0), delay=0, q=1e-3)
        for r in range(1, 41):
            feedback.step(session, disturbance=0.7 if r == 10 else None)
        lines = ["round,delta,fill_bits,plant_value"]
        for rec in session.log:
            delta_txt = "" if rec.delta is None else repr(rec.delta)
            lines.append(f"{rec.round},{delta_txt},{rec.fill_bits},{rec.plant_value!r}")
        write_csv(lines, out / "feedback_affine_rounds.csv")
        summary = {
            "scenario": name,
            "reference": 5.0,
            "error_function": {"type": "affine", "gain": 1.0, "offset": 2.0},
            "disturbance": {"round": 10, "value": 0.7},
            "final_plant": session.plant,
            "fills": [rec.fill_bits for rec in session.log],
            "rounds_csv": str(out / "feedback_affine_rounds.csv"),
        }
        write_json(summary, out / "feedback_affine_summary.json")
        return summary
    raise ConfigError("scenario", f"unknown scenario {name!r} (known: {', '.join(SCENARIO_NAMES)})")
