# turbobw/experiments.py
"""
Seeded Monte-Carlo experiments: SNR x mode sweeps, aggregated into CSV rows.

Configuration files are plain ``key=value`` text (parsed with python-dotenv),
overridden by ``TURBOBW_<KEY>`` environment variables and then by explicit
overrides (the command-line flags).
"""
import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple

import numpy as np
from dotenv import dotenv_values

from .baum_welch import VARIANCE_MODES, InitSpec
from .channel import ChannelSpec, snr_to_variance, true_param_table
from .comm_chain import ConvCode, InterleaverSpec, TxFrame, random_frame
from .constants import (
    DEFAULT_CONSTRAINT_REGISTERS,
    DEFAULT_EM_ITERS_PER_TURBO,
    DEFAULT_FRAME_LENGTH,
    DEFAULT_GENERATORS,
    DEFAULT_INIT_ERROR,
    DEFAULT_INTERLEAVER_SEED,
    DEFAULT_MODES,
    DEFAULT_N_FRAMES,
    DEFAULT_RESULTS_PATH,
    DEFAULT_SEED,
    DEFAULT_SNR_DB,
    DEFAULT_TAPS,
    DEFAULT_TURBO_ITERS,
    DEFAULT_VARIANCE_MODE,
    DEFAULT_WORKERS,
    ENV_PREFIX,
    PLATEAU_TOLERANCE,
)
from .errors import ConfigError, InputError, TurboBWError
from .receiver import IterationTrace, Mode, ReceiverConfig, TurboReceiver
from .trellis import parse_generator

logger = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    taps: Tuple[float, ...] = DEFAULT_TAPS
    generators: Tuple[int, ...] = DEFAULT_GENERATORS
    constraint_registers: int = DEFAULT_CONSTRAINT_REGISTERS
    frame_length: int = DEFAULT_FRAME_LENGTH
    interleaver_seed: int = DEFAULT_INTERLEAVER_SEED
    snr_db: Tuple[float, ...] = DEFAULT_SNR_DB
    modes: Tuple[Mode, ...] = tuple(Mode(m) for m in DEFAULT_MODES)
    n_turbo_iters: int = DEFAULT_TURBO_ITERS
    em_iters_per_turbo: int = DEFAULT_EM_ITERS_PER_TURBO
    init_error: float = DEFAULT_INIT_ERROR
    variance_mode: str = DEFAULT_VARIANCE_MODE
    warm_start: bool = True
    n_frames: int = DEFAULT_N_FRAMES
    seed: int = DEFAULT_SEED
    output: str = DEFAULT_RESULTS_PATH
    workers: int = DEFAULT_WORKERS

    def code(self) -> ConvCode:
        return ConvCode(self.generators, self.constraint_registers)

    def receiver_config(self, mode: Mode) -> ReceiverConfig:
        return ReceiverConfig(
            mode=mode,
            n_turbo_iters=self.n_turbo_iters,
            em_iters_per_turbo=self.em_iters_per_turbo,
            variance_mode=self.variance_mode,
            warm_start=self.warm_start,
        )


@dataclass
class ResultRow:
    mode: str
    snr_db: float
    turbo_iter: int
    em_iter: int
    mse_mean: float
    mse_stderr: float
    ber_mean: float
    frames: int
    seed: int

    def __post_init__(self):
        if self.mse_mean < 0:
            raise InputError(f"negative MSE {self.mse_mean}")
        if not math.isnan(self.ber_mean) and not 0.0 <= self.ber_mean <= 1.0:
            raise InputError(f"BER {self.ber_mean} outside [0, 1]")


CSV_COLUMNS = [f.name for f in fields(ResultRow)]


@dataclass
class CellSummary:
    mode: str
    snr_db: float
    final_mse: float
    final_ber: float
    plateau_em_iter: int


# ---------- Config parsing ----------


def _split(raw: str) -> List[str]:
    return [part.strip() for part in str(raw).split(",") if part.strip()]


def _parse_bool(raw: str) -> bool:
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _float_list(raw: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in _split(raw))


_PARSERS: Dict[str, Callable[[str], object]] = {
    "taps": _float_list,
    "generators": lambda raw: tuple(parse_generator(v) for v in _split(raw)),
    "constraint_registers": int,
    "frame_length": int,
    "interleaver_seed": int,
    "snr_db": _float_list,
    "modes": lambda raw: tuple(dict.fromkeys(Mode.parse(v) for v in _split(raw))),
    "n_turbo_iters": int,
    "em_iters_per_turbo": int,
    "init_error": float,
    "variance_mode": lambda raw: str(raw).strip(),
    "warm_start": _parse_bool,
    "n_frames": int,
    "seed": int,
    "output": lambda raw: str(raw).strip(),
    "workers": int,
}


def _check_value(key: str, value) -> Optional[str]:
    """Per-key validation; returns an error message or None."""
    if key in ("n_turbo_iters", "em_iters_per_turbo", "frame_length", "n_frames", "workers") and value < 1:
        return f"must be a positive integer, got {value}"
    if key in ("constraint_registers", "interleaver_seed", "seed") and value < 0:
        return f"must be >= 0, got {value}"
    if key == "init_error" and not (math.isfinite(value) and value >= 0):
        return f"must be a finite value >= 0, got {value}"
    if key == "snr_db":
        if not value:
            return "SNR grid must not be empty"
        if not all(math.isfinite(v) for v in value):
            return "SNR values must be finite"
    if key in ("taps", "generators", "modes") and not value:
        return "must not be empty"
    if key == "taps" and not (all(math.isfinite(v) for v in value) and any(v != 0 for v in value)):
        return "taps must be finite with nonzero energy"
    if key == "variance_mode" and value not in VARIANCE_MODES:
        return f"expected one of {VARIANCE_MODES}, got {value!r}"
    if key == "output" and not value:
        return "output path must not be empty"
    return None


def _key_lines(path: str) -> Dict[str, int]:
    lines: Dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as f:
        for number, text in enumerate(f, start=1):
            text = text.strip()
            if not text or text.startswith("#"):
                continue
            if text.startswith("export "):
                text = text[len("export "):]
            key = text.split("=", 1)[0].strip()
            lines[key] = number
    return lines


def parse_config(
    path: Optional[str] = None,
    overrides: Optional[Mapping[str, object]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> ExperimentConfig:
    """
    Build a validated ExperimentConfig from defaults < file < environment < overrides.

    Raises ConfigError naming the offending key (and its line for file input).
    """
    raw: Dict[str, Tuple[object, Optional[int]]] = {}

    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}", key="config")
        lines = _key_lines(path)
        for key, value in dotenv_values(path).items():
            line = lines.get(key)
            if key not in _PARSERS:
                raise ConfigError("unknown key", key=key, line=line)
            if value is None:
                raise ConfigError("missing '=' and value", key=key, line=line)
            raw[key] = (value, line)

    env = os.environ if environ is None else environ
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        if key not in _PARSERS:
            raise ConfigError(f"unknown key in environment variable {name}", key=key)
        raw[key] = (value, None)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _PARSERS:
            raise ConfigError("unknown key", key=key)
        raw[key] = (value, None)

    values = {}
    for key, (value, line) in raw.items():
        try:
            parsed = _PARSERS[key](value) if isinstance(value, str) else _coerce(key, value)
        except TurboBWError as e:
            raise ConfigError(getattr(e, "message", str(e)), key=key, line=line) from None
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid value {value!r} ({e})", key=key, line=line) from None
        problem = _check_value(key, parsed)
        if problem:
            raise ConfigError(problem, key=key, line=line)
        values[key] = parsed

    config = ExperimentConfig(**values)
    _validate_whole(config, {k: line for k, (_, line) in raw.items()})
    return config


def _coerce(key: str, value):
    """Overrides may arrive already typed (lists, numbers) from the CLI or tests."""
    if isinstance(value, (list, tuple)):
        return _PARSERS[key](",".join(str(getattr(v, "value", v)) for v in value))
    if isinstance(value, bool) and key == "warm_start":
        return value
    return _PARSERS[key](str(value))


def _validate_whole(config: ExperimentConfig, lines: Mapping[str, Optional[int]]):
    try:
        config.code().trellis
    except ConfigError as e:
        raise ConfigError(e.message, key="generators", line=lines.get("generators")) from None


# ---------- Running ----------


def frame_seeds(seed: int, snr_index: int, frame_index: int):
    """
    Per-frame streams: SeedSequence(seed, spawn_key=(snr_index, frame_index))
    spawns three children (info bits, channel noise, initialisation error).
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(snr_index), int(frame_index)))
    bits_ss, noise_ss, init_ss = ss.spawn(3)
    return (
        np.random.default_rng(bits_ss),
        np.random.default_rng(noise_ss),
        int(init_ss.generate_state(1)[0]),
    )


@dataclass
class _FrameJob:
    frame: TxFrame
    init: InitSpec
    truth: np.ndarray


def _make_jobs(config: ExperimentConfig, code: ConvCode, interleaver: InterleaverSpec, snr_index: int, snr_db: float):
    channel = ChannelSpec(taps=config.taps, noise_variance=snr_to_variance(snr_db))
    jobs = []
    truth = None
    for frame_index in range(config.n_frames):
        bits_rng, noise_rng, init_seed = frame_seeds(config.seed, snr_index, frame_index)
        frame = random_frame(config.frame_length, code, interleaver, channel, bits_rng, noise_rng)
        if truth is None:
            truth = true_param_table(channel, TurboReceiver(code, interleaver, channel.memory).reduced)
        init = InitSpec(
            true_means=truth,
            perturbation_magnitude=config.init_error,
            variance_mode=config.variance_mode,
            rng_seed=init_seed,
            noise_variance=channel.noise_variance,
        )
        jobs.append(_FrameJob(frame, init, truth))
    return jobs


def _run_cell(receiver: TurboReceiver, jobs: Sequence[_FrameJob], workers: int) -> List[IterationTrace]:
    def one(job: _FrameJob) -> IterationTrace:
        return receiver.run(job.frame, job.init, job.truth)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, jobs))
    return [one(job) for job in jobs]


def aggregate(mode: Mode, snr_db: float, traces: Sequence[IterationTrace], seed: int) -> List[ResultRow]:
    """One row per record index; MSE mean/stderr and BER mean across frames."""
    if not traces:
        return []
    mse = np.array([t.mse for t in traces])
    ber = np.array([t.ber for t in traces])
    n = len(traces)
    rows = []
    for i, record in enumerate(traces[0].records):
        stderr = float(np.std(mse[:, i], ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        valid = ber[:, i][~np.isnan(ber[:, i])]
        rows.append(
            ResultRow(
                mode=mode.value,
                snr_db=float(snr_db),
                turbo_iter=record.turbo_iter,
                em_iter=record.em_iter,
                mse_mean=float(np.mean(mse[:, i])),
                mse_stderr=stderr,
                ber_mean=float(np.mean(valid)) if valid.size else float("nan"),
                frames=n,
                seed=int(seed),
            )
        )
    return rows


def iterations_to_plateau(mse: Sequence[float], em_iters: Sequence[int], tolerance: float = PLATEAU_TOLERANCE) -> int:
    """First EM iteration from which the MSE stays within ``tolerance`` of its final value."""
    mse = np.asarray(mse, dtype=np.float64)
    if mse.size == 0:
        return 0
    within = np.abs(mse - mse[-1]) <= tolerance * abs(mse[-1])
    first = mse.size - 1
    while first > 0 and within[first - 1]:
        first -= 1
    return int(em_iters[first])


def summarize(rows: Sequence[ResultRow]) -> List[CellSummary]:
    cells: Dict[Tuple[str, float], List[ResultRow]] = {}
    for row in rows:
        cells.setdefault((row.mode, row.snr_db), []).append(row)
    summaries = []
    for (mode, snr), cell in cells.items():
        summaries.append(
            CellSummary(
                mode=mode,
                snr_db=snr,
                final_mse=cell[-1].mse_mean,
                final_ber=cell[-1].ber_mean,
                plateau_em_iter=iterations_to_plateau([r.mse_mean for r in cell], [r.em_iter for r in cell]),
            )
        )
    return summaries


def _fmt(value) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else format(value, ".12g")
    return str(value)


def write_csv(rows: Iterable[ResultRow], path: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(v) for v in asdict(row).values()])


def print_summary(summaries: Sequence[CellSummary], stream: TextIO):
    stream.write(f"{'mode':<13}{'snr_db':>8}{'final_mse':>14}{'final_ber':>12}{'plateau_em':>12}\n")
    for s in summaries:
        stream.write(
            f"{s.mode:<13}{s.snr_db:>8.2f}{s.final_mse:>14.4e}{_fmt(s.final_ber) or '-':>12}{s.plateau_em_iter:>12d}\n"
        )
    by_cell = {(s.mode, s.snr_db): s for s in summaries}
    for (mode, snr), s in by_cell.items():
        other = by_cell.get((Mode.STANDALONE.value, snr))
        if mode == Mode.JOINT.value and other is not None and s.plateau_em_iter > 0:
            stream.write(
                f"snr {snr:g} dB: joint converges in {s.plateau_em_iter} EM iterations, "
                f"standalone in {other.plateau_em_iter} "
                f"(speed-up x{other.plateau_em_iter / s.plateau_em_iter:.2f})\n"
            )


def run_experiment(config: ExperimentConfig, stream: Optional[TextIO] = None) -> List[ResultRow]:
    """Run every (mode, SNR) cell, write the CSV and print a summary to ``stream``."""
    code = config.code()
    interleaver = InterleaverSpec.random(code.coded_length(config.frame_length), config.interleaver_seed)
    memory = len(config.taps)
    results: Dict[Tuple[Mode, int], List[ResultRow]] = {}

    for snr_index, snr_db in enumerate(config.snr_db):
        jobs = _make_jobs(config, code, interleaver, snr_index, snr_db)
        for mode in config.modes:
            logger.info("running %s at %g dB over %d frames", mode.value, snr_db, config.n_frames)
            receiver = TurboReceiver(code, interleaver, memory, config.receiver_config(mode))
            traces = _run_cell(receiver, jobs, config.workers)
            results[(mode, snr_index)] = aggregate(mode, snr_db, traces, config.seed)

    rows = [
        row
        for mode in config.modes
        for snr_index in range(len(config.snr_db))
        for row in results[(mode, snr_index)]
    ]
    write_csv(rows, config.output)
    logger.info("wrote %d rows to %s", len(rows), config.output)
    if stream is not None:
        print_summary(summarize(rows), stream)
    return rows
