"""Synthetic two-class benchmark with planted lagged couplings.

Every node starts as seeded white noise, optionally smoothed with a short
boxcar so signals carry temporal autocorrelation (without it, a lagged copy
of white noise correlates at zero lag with nothing, so planted pairs could
never enter the correlation-thresholded graph).  For each informative pair
(source, target) the target mixes in the source's signal delayed by the
class's planted lag at the class's coupling strength, optionally gated to a
schedule of frame intervals; per-frame mixing weights keep unit variance.
Class-symmetric lags (+L vs -L) leave the static zero-lag correlation
identical between classes by the symmetry of the autocorrelation function.

Driver (source) nodes can additionally receive a sparse train of signed
amplitude bumps: positive for class 1 subjects, negative for class 0.  The
bumps survive per-node standardization, barely move any correlation, and
give the post-hoc logistic probe a planted amplitude direction to recover.

Beyond the single global coupling rule, `pair_groups` plants several
independent coupling mechanisms at once, each with its own pairs, per-class
lags, couplings, schedules, and driver amplitude bursts.  A burst multiplies
the driver signal inside a frame interval, so coupled correlations climb
toward saturation in burst windows (windowed Pearson renormalizes per
window) while the full-span statistics can be held class-symmetric by
balancing couplings.  `nuisance_block_count` adds per-subject random
correlated background communities: class-irrelevant structure that crowds
the correlation-ranked edge budget and pollutes raw connectivity features.

Generation is reproducible bit for bit: each subject draws from its own
(seed, subject_id) sub-stream.
"""

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError
from .rng import substream

_SPEC_FIELDS = {
    "node_count", "frame_count", "subjects_per_class", "informative_pairs",
    "lag_class_a", "lag_class_b", "coupling_class_a", "coupling_class_b",
    "schedule_class_a", "schedule_class_b", "noise_std", "smoothing",
    "activation_bias", "activation_density", "seed", "pair_groups",
    "nuisance_block_count", "nuisance_block_size", "nuisance_coupling",
}

_GROUP_REQUIRED = {
    "pairs", "lag_class_a", "lag_class_b", "coupling_class_a", "coupling_class_b",
}
_GROUP_FIELDS = _GROUP_REQUIRED | {
    "schedule_class_a", "schedule_class_b", "burst_class_a", "burst_class_b",
}


@dataclass
class SynthSpec:
    node_count: int = 30
    frame_count: int = 400
    subjects_per_class: int = 100
    informative_pairs: list = field(default_factory=list)  # [[source, target], ...]
    lag_class_a: int = 3
    lag_class_b: int = -3
    coupling_class_a: float = 0.6
    coupling_class_b: float = 0.6
    schedule_class_a: list | None = None   # [[start, end), ...] frame intervals
    schedule_class_b: list | None = None
    noise_std: float = 1.0
    smoothing: int = 1                     # boxcar length; 1 = raw white noise
    activation_bias: float = 0.0
    activation_density: float = 0.1
    seed: int = 0
    pair_groups: list | None = None        # overrides the single-rule fields
    nuisance_block_count: int = 0
    nuisance_block_size: int = 0
    nuisance_coupling: float = 0.0         # latent mixing weight; pair corr = weight^2

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        if not isinstance(data, dict):
            raise ConfigurationError("synthetic spec must be a JSON object")
        unknown = sorted(set(data) - _SPEC_FIELDS)
        if unknown:
            raise ConfigurationError(f"unknown synthetic spec keys: {', '.join(unknown)}")
        return cls(**data).validate()

    def coupling_groups(self) -> list[dict]:
        """Planted coupling rules as a uniform list of group dicts."""
        if self.pair_groups is None:
            return [{
                "pairs": self.informative_pairs,
                "lag_class_a": self.lag_class_a,
                "lag_class_b": self.lag_class_b,
                "coupling_class_a": self.coupling_class_a,
                "coupling_class_b": self.coupling_class_b,
                "schedule_class_a": self.schedule_class_a,
                "schedule_class_b": self.schedule_class_b,
                "burst_class_a": None,
                "burst_class_b": None,
            }]
        groups = []
        for raw in self.pair_groups:
            group = {name: None for name in _GROUP_FIELDS - _GROUP_REQUIRED}
            group.update(raw)
            groups.append(group)
        return groups

    def validate(self) -> "SynthSpec":
        r, t = self.node_count, self.frame_count
        if r < 2:
            raise ConfigurationError(f"node_count must be >= 2, got {r}")
        if self.subjects_per_class < 1:
            raise ConfigurationError("subjects_per_class must be positive")
        if self.noise_std <= 0:
            raise ConfigurationError(f"noise_std must be positive, got {self.noise_std}")
        if self.smoothing < 1:
            raise ConfigurationError(f"smoothing must be >= 1, got {self.smoothing}")
        if not 0.0 <= self.activation_density <= 1.0:
            raise ConfigurationError("activation_density must be in [0, 1]")
        if self.pair_groups is not None:
            if self.informative_pairs:
                raise ConfigurationError(
                    "informative_pairs must be empty when pair_groups is given")
            if not isinstance(self.pair_groups, list) or not self.pair_groups:
                raise ConfigurationError("pair_groups must be a non-empty list")
            for i, raw in enumerate(self.pair_groups):
                if not isinstance(raw, dict):
                    raise ConfigurationError(f"pair group {i} must be an object")
                unknown = sorted(set(raw) - _GROUP_FIELDS)
                if unknown:
                    raise ConfigurationError(
                        f"pair group {i}: unknown keys: {', '.join(unknown)}")
                missing = sorted(_GROUP_REQUIRED - set(raw))
                if missing:
                    raise ConfigurationError(
                        f"pair group {i}: missing keys: {', '.join(missing)}")
        groups = self.coupling_groups()
        max_lag = 0
        for i, group in enumerate(groups):
            for side in ("a", "b"):
                lag = group[f"lag_class_{side}"]
                if isinstance(lag, bool) or not isinstance(lag, int):
                    raise ConfigurationError(
                        f"pair group {i}: lag_class_{side} must be an integer")
                max_lag = max(max_lag, abs(lag))
                c = group[f"coupling_class_{side}"]
                if not 0.0 <= c < 1.0:
                    raise ConfigurationError(f"coupling must be in [0, 1), got {c}")
        if t < max(20, 8 * (max_lag + 1), 8 * self.smoothing):
            raise ConfigurationError(
                f"frame_count {t} too small for lag {max_lag} and smoothing "
                f"{self.smoothing}")
        sources, targets = set(), set()
        for group in groups:
            for pair in group["pairs"]:
                if len(pair) != 2:
                    raise ConfigurationError(
                        f"informative pair {pair} must be [source, target]")
                s, g = int(pair[0]), int(pair[1])
                if not (0 <= s < r and 0 <= g < r) or s == g:
                    raise ConfigurationError(f"informative pair ({s}, {g}) out of range")
                sources.add(s)
                targets.add(g)
        overlap = sources & targets
        if overlap:
            raise ConfigurationError(
                f"nodes {sorted(overlap)} are both sources and targets; mixing "
                f"would be ill-defined")
        for i, group in enumerate(groups):
            for side in ("a", "b"):
                sched = group[f"schedule_class_{side}"]
                if sched is not None:
                    for span in sched:
                        if len(span) != 2 or not (0 <= span[0] < span[1] <= t):
                            raise ConfigurationError(
                                f"pair group {i}: schedule_class_{side}: bad "
                                f"interval {span}")
                bursts = group[f"burst_class_{side}"]
                if bursts is not None:
                    for span in bursts:
                        if (len(span) != 3 or not (0 <= span[0] < span[1] <= t)
                                or not span[2] > 0):
                            raise ConfigurationError(
                                f"pair group {i}: burst_class_{side}: bad "
                                f"[start, end, amplitude] {span}")
        for side in ("a", "b"):
            load: dict[int, np.ndarray] = {}
            for group in groups:
                c_t = group[f"coupling_class_{side}"] * _schedule_mask(
                    group[f"schedule_class_{side}"], t)
                for pair in group["pairs"]:
                    g = int(pair[1])
                    load[g] = load.get(g, 0.0) + c_t ** 2
            for g, series in load.items():
                peak = float(np.max(series))
                if peak >= 1.0:
                    raise ConfigurationError(
                        f"target node {g}: summed squared couplings reach "
                        f"{peak:.3f} >= 1 for class {side}")
        if self.nuisance_block_count < 0:
            raise ConfigurationError("nuisance_block_count must be >= 0")
        if self.nuisance_block_count > 0:
            if self.nuisance_block_size < 2:
                raise ConfigurationError("nuisance_block_size must be >= 2")
            if not 0.0 <= self.nuisance_coupling < 1.0:
                raise ConfigurationError(
                    f"nuisance_coupling must be in [0, 1), got {self.nuisance_coupling}")
            available = r - len(self.planted_nodes)
            need = self.nuisance_block_count * self.nuisance_block_size
            if need > available:
                raise ConfigurationError(
                    f"nuisance blocks need {need} background nodes, only "
                    f"{available} are free of planted structure")
        return self

    @property
    def planted_nodes(self) -> list[int]:
        return sorted({int(n) for group in self.coupling_groups()
                       for pair in group["pairs"] for n in pair})

    @property
    def driver_nodes(self) -> list[int]:
        return sorted({int(pair[0]) for group in self.coupling_groups()
                       for pair in group["pairs"]})


def _smooth_rows(x: np.ndarray, width: int) -> np.ndarray:
    if width == 1:
        return x
    kernel = np.full(width, 1.0 / np.sqrt(width))
    return np.vstack([np.convolve(row, kernel, mode="same") for row in x])


def _schedule_mask(spans, t: int) -> np.ndarray:
    if spans is None:
        return np.ones(t)
    mask = np.zeros(t)
    for start, end in spans:
        mask[int(start): int(end)] = 1.0
    return mask


def _class_key(name: str, label: int) -> str:
    return f"{name}_class_{'a' if label == 0 else 'b'}"


def generate_subject(spec: SynthSpec, subject_id: str, label: int) -> np.ndarray:
    """One subject's standardized (R, T) signal matrix."""
    spec.validate()
    r, t = spec.node_count, spec.frame_count
    groups = spec.coupling_groups()
    max_lag = max((abs(g[_class_key("lag", lab)]) for g in groups for lab in (0, 1)),
                  default=0)
    guard = spec.smoothing + max_lag + 8
    rng = substream(spec.seed, "synth", subject_id)
    base = _smooth_rows(rng.normal(0.0, spec.noise_std, size=(r, t + 2 * guard)),
                        spec.smoothing)
    for group in groups:
        bursts = group[_class_key("burst", label)]
        if not bursts:
            continue
        drivers = sorted({int(pair[0]) for pair in group["pairs"]})
        for start, end, amplitude in bursts:
            base[drivers, guard + int(start): guard + int(end)] *= amplitude
    if spec.activation_bias != 0.0 and spec.activation_density > 0.0:
        bump_count = int(round(spec.activation_density * t))
        sign = 1.0 if label == 1 else -1.0
        for node in spec.driver_nodes:
            times = rng.choice(t, size=bump_count, replace=False)
            base[node, guard + times] += sign * spec.activation_bias * spec.noise_std

    out = np.array(base[:, guard: guard + t])
    mixed: dict[int, np.ndarray] = {}
    weight: dict[int, np.ndarray] = {}
    for group in groups:
        lag = group[_class_key("lag", label)]
        c_t = group[_class_key("coupling", label)] * _schedule_mask(
            group[_class_key("schedule", label)], t)
        for source, target in group["pairs"]:
            shifted = base[int(source), guard - lag: guard - lag + t]
            mixed[target] = mixed.get(target, 0.0) + c_t * shifted
            weight[target] = weight.get(target, 0.0) + c_t ** 2
    for target, contribution in mixed.items():
        own = base[int(target), guard: guard + t]
        out[int(target)] = np.sqrt(1.0 - weight[target]) * own + contribution
    if spec.nuisance_block_count > 0:
        planted = set(spec.planted_nodes)
        pool = np.array([n for n in range(r) if n not in planted])
        members = rng.choice(pool, size=(spec.nuisance_block_count,
                                         spec.nuisance_block_size), replace=False)
        latents = _smooth_rows(
            rng.normal(0.0, spec.noise_std,
                       size=(spec.nuisance_block_count, t + 2 * guard)),
            spec.smoothing)[:, guard: guard + t]
        c = spec.nuisance_coupling
        own_scale = np.sqrt(1.0 - c * c)
        for block, latent in zip(members, latents):
            out[block] = own_scale * out[block] + c * latent
    out -= out.mean(axis=1, keepdims=True)
    out /= out.std(axis=1, keepdims=True)
    return out


def generate(spec: SynthSpec, out_dir) -> str:
    """Write the dataset; returns the manifest path.

    Layout: out_dir/subjects/<id>.csv, out_dir/manifest.json, and
    out_dir/spec.json carrying the resolved spec plus ground truth
    (planted nodes, driver nodes, amplitude direction).
    """
    spec.validate()
    subject_dir = os.path.join(out_dir, "subjects")
    os.makedirs(subject_dir, exist_ok=True)
    manifest = []
    for label, prefix in ((0, "a"), (1, "b")):
        for k in range(spec.subjects_per_class):
            sid = f"{prefix}{k:03d}"
            values = generate_subject(spec, sid, label)
            rel = os.path.join("subjects", f"{sid}.csv")
            with open(os.path.join(out_dir, rel), "w") as fh:
                for row in values:
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
            manifest.append({"id": sid, "path": rel, "label": label})
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    ground_truth = {
        "planted_nodes": spec.planted_nodes,
        "driver_nodes": spec.driver_nodes,
        "amplitude_direction": ({str(n): 1 for n in spec.driver_nodes}
                                if spec.activation_bias > 0 else {}),
    }
    with open(os.path.join(out_dir, "spec.json"), "w") as fh:
        json.dump({"spec": asdict(spec), "ground_truth": ground_truth},
                  fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest_path


def load_spec(path) -> SynthSpec:
    """Read a synthetic spec JSON file (either bare or under a "spec" key)."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read synthetic spec {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"{path}: malformed JSON at byte offset {exc.pos}: {exc.msg}") from exc
    if isinstance(data, dict) and "spec" in data and set(data) <= {"spec", "ground_truth"}:
        data = data["spec"]
    return SynthSpec.from_dict(data)
