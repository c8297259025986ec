"""Problem instances: scenario definition, validation, and config file I/O.

All internal quantities are linear (watts, meters, normalized channel gain);
dB/dBm appear only in the config file and are converted at load time.
The noise power is normalized to 1, so ``gamma0`` is the reference channel
gain already divided by the noise power.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

Point = tuple[float, float]

#: Relative tolerance used by all invariant checks.
TOL = 1e-6

_CONFIG_KEYS = {
    "gn", "eve_est", "eve_eps_m", "h1_m", "h2_m", "v_mps", "slot_s",
    "horizon_s", "p_ave_dbm", "p_peak_over_ave", "gamma0_db",
    "start", "end", "start_tx", "start_jam", "end_tx", "end_jam",
}
_REQUIRED_KEYS = {
    "gn", "eve_est", "eve_eps_m", "h1_m", "h2_m", "v_mps", "slot_s",
    "horizon_s", "p_ave_dbm", "p_peak_over_ave", "gamma0_db",
}
_POINT_KEYS = {"gn", "eve_est", "start", "end", "start_tx", "start_jam",
               "end_tx", "end_jam"}


class ConfigError(ValueError):
    """Base class for config file problems."""


class ConfigParseError(ConfigError):
    """Malformed config text; message carries file and line location."""


class ConfigKeyError(ConfigError):
    """Missing required key or unknown key in a config file."""


class ScenarioValidationError(ValueError):
    """A scenario violates its invariants; carries the ValidationReport."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("invalid scenario:\n" + "\n".join(report.failures))


@dataclass(frozen=True)
class Scenario:
    """Immutable problem instance shared by every solver component."""

    gn_location: Point            # ground node, meters
    est_eve_location: Point       # estimated eavesdropper location, meters
    eve_uncertainty: float        # radius of the eavesdropper location error, m
    altitude_tx: float            # fixed altitude of the transmitter UAV, m
    altitude_jam: float           # fixed altitude of the jammer UAV, m
    max_step_tx: float            # max per-slot displacement of the tx UAV, m
    max_step_jam: float           # max per-slot displacement of the jammer, m
    slot_duration: float          # seconds per slot
    num_slots: int                # N; waypoints are indexed 0..N+1
    p_ave: float                  # average power budget per UAV, watts
    p_peak: float                 # peak power per UAV per slot, watts
    gamma0: float                 # reference gain at 1 m over noise power, m^2
    start_tx: Point
    end_tx: Point
    start_jam: Point
    end_jam: Point

    @property
    def horizon(self) -> float:
        return self.num_slots * self.slot_duration

    @property
    def w0(self) -> np.ndarray:
        return np.asarray(self.gn_location, dtype=float)

    @property
    def we(self) -> np.ndarray:
        return np.asarray(self.est_eve_location, dtype=float)


@dataclass
class Trajectory:
    """Per-UAV horizontal waypoints, shape (N+2, 2), indices 0..N+1."""

    waypoints_tx: np.ndarray
    waypoints_jam: np.ndarray

    def copy(self) -> "Trajectory":
        return Trajectory(self.waypoints_tx.copy(), self.waypoints_jam.copy())

    def check(self, s: Scenario, tol: float = TOL) -> list[str]:
        """Return the list of violated trajectory invariants (empty if ok)."""
        failures = []
        for label, wp, start, end, vmax in (
            ("tx", self.waypoints_tx, s.start_tx, s.end_tx, s.max_step_tx),
            ("jam", self.waypoints_jam, s.start_jam, s.end_jam, s.max_step_jam),
        ):
            wp = np.asarray(wp, dtype=float)
            if wp.shape != (s.num_slots + 2, 2):
                failures.append(f"{label}: expected {s.num_slots + 2} waypoints, got {wp.shape}")
                continue
            if not (np.array_equal(wp[0], start) and np.array_equal(wp[-1], end)):
                failures.append(f"{label}: endpoints {wp[0]}, {wp[-1]} differ from scenario "
                                f"{start}, {end}")
            steps = np.linalg.norm(np.diff(wp, axis=0), axis=1)
            bound = vmax * (1.0 + tol) + 1e-12
            if steps.max() > bound:
                n = int(steps.argmax())
                failures.append(f"{label}: step {n} length {steps[n]:.9g} exceeds "
                                f"max displacement {vmax:.9g}")
        return failures


@dataclass
class PowerProfile:
    """Per-slot transmit powers in watts, shape (N,), slots 1..N."""

    p_tx: np.ndarray
    p_jam: np.ndarray

    def copy(self) -> "PowerProfile":
        return PowerProfile(self.p_tx.copy(), self.p_jam.copy())

    def check(self, s: Scenario, tol: float = TOL) -> list[str]:
        """Return the list of violated power-constraint invariants."""
        failures = []
        for label, p in (("tx", self.p_tx), ("jam", self.p_jam)):
            p = np.asarray(p, dtype=float)
            if p.shape != (s.num_slots,):
                failures.append(f"{label}: expected {s.num_slots} slots, got {p.shape}")
                continue
            if p.min() < -tol * s.p_peak:
                failures.append(f"{label}: negative power {p.min():.9g}")
            if p.max() > s.p_peak * (1.0 + tol):
                failures.append(f"{label}: peak power {p.max():.9g} exceeds {s.p_peak:.9g}")
            if p.mean() > s.p_ave * (1.0 + tol):
                failures.append(f"{label}: average power {p.mean():.9g} exceeds {s.p_ave:.9g}")
        return failures


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    failures: tuple[str, ...]

    def __str__(self) -> str:
        if self.ok:
            return "scenario: pass"
        return "scenario: FAIL\n" + "\n".join("  - " + f for f in self.failures)


def validate(s: Scenario) -> ValidationReport:
    """Check every scenario invariant; failures carry the offending values."""
    bad = []
    if not s.altitude_tx > 0:
        bad.append(f"altitude_tx must be > 0, got {s.altitude_tx}")
    if not s.altitude_jam > 0:
        bad.append(f"altitude_jam must be > 0, got {s.altitude_jam}")
    if not s.eve_uncertainty >= 0:
        bad.append(f"eve_eps_m must be >= 0, got {s.eve_uncertainty}")
    if not s.gamma0 > 0:
        bad.append(f"gamma0 must be > 0, got {s.gamma0}")
    if not s.p_ave > 0:
        bad.append(f"p_ave must be > 0, got {s.p_ave}")
    if not s.p_ave <= s.p_peak * (1.0 + TOL):
        bad.append(f"p_ave {s.p_ave} must not exceed p_peak {s.p_peak}")
    if not (isinstance(s.num_slots, int) and s.num_slots >= 1):
        bad.append(f"num_slots must be an integer >= 1, got {s.num_slots!r}")
    if not s.slot_duration > 0:
        bad.append(f"slot_s must be > 0, got {s.slot_duration}")
    if not s.max_step_tx > 0:
        bad.append(f"tx max step must be > 0, got {s.max_step_tx}")
    if not s.max_step_jam > 0:
        bad.append(f"jam max step must be > 0, got {s.max_step_jam}")
    if isinstance(s.num_slots, int) and s.num_slots >= 1:
        budget_slots = s.num_slots + 1
        for label, a, b, v in (("tx", s.start_tx, s.end_tx, s.max_step_tx),
                               ("jam", s.start_jam, s.end_jam, s.max_step_jam)):
            if v <= 0:
                continue
            dist = math.hypot(b[0] - a[0], b[1] - a[1])
            reach = budget_slots * v
            if dist > reach * (1.0 + TOL):
                bad.append(f"{label}: endpoint distance {dist:.9g} m exceeds reachable "
                           f"{reach:.9g} m = (N+1) * max step")
    return ValidationReport(ok=not bad, failures=tuple(bad))


def reference_scenario(horizon_s: int, slot_s: float = 1.0) -> Scenario:
    """Reference scenario at the given mission duration (slot length 1 s).

    GN at the origin, eavesdropper estimated 200 m east with a 10 m error
    radius, UAV altitudes 100/110 m, 10 m/s speed limit, 30 dBm average and
    4x peak power, 80 dB reference SNR, shared start (100, 500) and end
    (100, -500). Not validated here; short horizons are deliberately
    constructible (and fail validate()).
    """
    n = int(round(horizon_s / slot_s))
    step = 10.0 * slot_s
    return Scenario(
        gn_location=(0.0, 0.0),
        est_eve_location=(200.0, 0.0),
        eve_uncertainty=10.0,
        altitude_tx=100.0,
        altitude_jam=110.0,
        max_step_tx=step,
        max_step_jam=step,
        slot_duration=slot_s,
        num_slots=n,
        p_ave=1.0,
        p_peak=4.0,
        gamma0=1e8,
        start_tx=(100.0, 500.0),
        end_tx=(100.0, -500.0),
        start_jam=(100.0, 500.0),
        end_jam=(100.0, -500.0),
    )


def with_horizon(s: Scenario, horizon_s: float) -> Scenario:
    """Scenario with a new mission duration; slot length is kept."""
    n = horizon_s / s.slot_duration
    if abs(n - round(n)) > 1e-9:
        raise ScenarioValidationError(ValidationReport(
            False, (f"horizon_s {horizon_s} is not a multiple of slot_s {s.slot_duration}",)))
    return replace(s, num_slots=int(round(n)))


def with_eve_uncertainty(s: Scenario, eps_m: float) -> Scenario:
    return replace(s, eve_uncertainty=float(eps_m))


# ---------------------------------------------------------------------------
# Config file I/O.  Format: one `key = value` per line, values are numbers or
# 2-element lists `[x, y]`; `#` starts a comment.  See README for the schema.
# ---------------------------------------------------------------------------

def _parse_number(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigParseError(f"{where}: expected a number, got {text!r}") from None


def _parse_value(text: str, where: str):
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigParseError(f"{where}: unterminated list {text!r}")
        parts = text[1:-1].split(",")
        if len(parts) != 2:
            raise ConfigParseError(f"{where}: expected [x, y], got {text!r}")
        return (_parse_number(parts[0].strip(), where),
                _parse_number(parts[1].strip(), where))
    return _parse_number(text, where)


def parse_config(path: str | Path) -> dict:
    """Parse a config file into {key: number | (x, y)}; schema-checked."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    data: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        where = f"{path.name}:{lineno}"
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigParseError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        if key not in _CONFIG_KEYS:
            raise ConfigKeyError(f"{where}: unknown key {key!r}")
        if key in data:
            raise ConfigParseError(f"{where}: duplicate key {key!r}")
        parsed = _parse_value(value, where)
        is_point = isinstance(parsed, tuple)
        if is_point != (key in _POINT_KEYS):
            want = "[x, y]" if key in _POINT_KEYS else "a number"
            raise ConfigParseError(f"{where}: key {key!r} expects {want}")
        data[key] = parsed
    missing = sorted(_REQUIRED_KEYS - data.keys())
    for shared, per_uav in (("start", ("start_tx", "start_jam")),
                            ("end", ("end_tx", "end_jam"))):
        if shared not in data and not all(k in data for k in per_uav):
            missing.append(f"{shared} (or both {per_uav[0]} and {per_uav[1]})")
        if shared in data and any(k in data for k in per_uav):
            raise ConfigKeyError(f"{path.name}: give either {shared!r} or the per-UAV "
                                 f"keys {per_uav}, not both")
    if missing:
        raise ConfigKeyError(f"{path.name}: missing required keys: {', '.join(missing)}")
    return data


def scenario_from_config(data: dict) -> Scenario:
    """Build and validate a Scenario from parsed config values."""
    slot_s = data["slot_s"]
    if slot_s <= 0:
        raise ScenarioValidationError(ValidationReport(False, (f"slot_s must be > 0, got {slot_s}",)))
    n = data["horizon_s"] / slot_s
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise ScenarioValidationError(ValidationReport(
            False, (f"horizon_s {data['horizon_s']} must be a positive multiple of slot_s {slot_s}",)))
    p_ave = 10.0 ** (data["p_ave_dbm"] / 10.0) / 1e3
    start_tx = data.get("start_tx", data.get("start"))
    start_jam = data.get("start_jam", data.get("start"))
    end_tx = data.get("end_tx", data.get("end"))
    end_jam = data.get("end_jam", data.get("end"))
    s = Scenario(
        gn_location=data["gn"],
        est_eve_location=data["eve_est"],
        eve_uncertainty=data["eve_eps_m"],
        altitude_tx=data["h1_m"],
        altitude_jam=data["h2_m"],
        max_step_tx=data["v_mps"] * slot_s,
        max_step_jam=data["v_mps"] * slot_s,
        slot_duration=slot_s,
        num_slots=int(round(n)),
        p_ave=p_ave,
        p_peak=p_ave * data["p_peak_over_ave"],
        gamma0=10.0 ** (data["gamma0_db"] / 10.0),
        start_tx=start_tx,
        end_tx=end_tx,
        start_jam=start_jam,
        end_jam=end_jam,
    )
    report = validate(s)
    if not report.ok:
        raise ScenarioValidationError(report)
    return s


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_config(parse_config(path))


def _preimage(forward, target: float, guess: float) -> float:
    """Nudge `guess` by ulps until forward(guess) reproduces `target` exactly.

    Used when saving so that the lossy dB/ratio encodings round-trip; returns
    the closest candidate if no exact preimage exists within 64 ulps.
    """
    best, best_err = guess, abs(forward(guess) - target)
    lo = hi = guess
    for _ in range(64):
        if best_err == 0.0:
            break
        hi = math.nextafter(hi, math.inf)
        lo = math.nextafter(lo, -math.inf)
        for cand in (hi, lo):
            err = abs(forward(cand) - target)
            if err < best_err:
                best, best_err = cand, err
    return best


def save_scenario(s: Scenario, path: str | Path) -> None:
    """Write a config file that load_scenario() maps back to `s` exactly."""
    if s.max_step_tx != s.max_step_jam:
        raise ValueError("config schema has a single v_mps; cannot encode distinct "
                         "per-UAV max steps")
    t = s.slot_duration
    p_ave_dbm = _preimage(lambda d: 10.0 ** (d / 10.0) / 1e3, s.p_ave,
                          10.0 * math.log10(s.p_ave * 1e3))
    ratio = _preimage(lambda r: (10.0 ** (p_ave_dbm / 10.0) / 1e3) * r, s.p_peak,
                      s.p_peak / s.p_ave)
    gamma0_db = _preimage(lambda d: 10.0 ** (d / 10.0), s.gamma0,
                          10.0 * math.log10(s.gamma0))
    v_mps = _preimage(lambda v: v * t, s.max_step_tx, s.max_step_tx / t)
    lines = [
        f"gn = [{s.gn_location[0]!r}, {s.gn_location[1]!r}]",
        f"eve_est = [{s.est_eve_location[0]!r}, {s.est_eve_location[1]!r}]",
        f"eve_eps_m = {s.eve_uncertainty!r}",
        f"h1_m = {s.altitude_tx!r}",
        f"h2_m = {s.altitude_jam!r}",
        f"v_mps = {v_mps!r}",
        f"slot_s = {t!r}",
        f"horizon_s = {s.num_slots * t!r}",
        f"p_ave_dbm = {p_ave_dbm!r}",
        f"p_peak_over_ave = {ratio!r}",
        f"gamma0_db = {gamma0_db!r}",
    ]
    if s.start_tx == s.start_jam:
        lines.append(f"start = [{s.start_tx[0]!r}, {s.start_tx[1]!r}]")
    else:
        lines.append(f"start_tx = [{s.start_tx[0]!r}, {s.start_tx[1]!r}]")
        lines.append(f"start_jam = [{s.start_jam[0]!r}, {s.start_jam[1]!r}]")
    if s.end_tx == s.end_jam:
        lines.append(f"end = [{s.end_tx[0]!r}, {s.end_tx[1]!r}]")
    else:
        lines.append(f"end_tx = [{s.end_tx[0]!r}, {s.end_tx[1]!r}]")
        lines.append(f"end_jam = [{s.end_jam[0]!r}, {s.end_jam[1]!r}]")
    Path(path).write_text("\n".join(lines) + "\n")


def bundled_reference_config() -> Path:
    """Path of the config shipped with the package (T = 200 s reference setup)."""
    return Path(__file__).parent / "configs" / "reference.cfg"
