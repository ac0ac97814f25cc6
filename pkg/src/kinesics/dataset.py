"""DUET skeleton dataset ingestion, bundling, and splits.

Raw input is one CSV per sample, named ``LLIISS_t1_t2.csv``, each row one
frame flattened person-major, joint-major, then x,y,z: 2 * 32 * 3 = 192
columns.  Ingestion reduces each skeleton from 32 capture joints to the
25-joint layout the graph backbone expects, and assembles everything into a
serializable bundle with cross-subject train/val name lists.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

BUNDLE_FORMAT_VERSION = "kbundle/1"

RAW_PERSONS = 2
RAW_JOINTS = 32
RAW_COORDS = 3
RAW_ROW_WIDTH = RAW_PERSONS * RAW_JOINTS * RAW_COORDS  # 192

NUM_JOINTS = 25

LOCATIONS = ("CC", "CM", "CL")

# Capture layout is the Azure Kinect 32-joint body model; the model layout is
# the familiar 25-joint skeleton (pelvis/spine/neck/head chain, arm chains
# ending wrist-hand-thumb-tip, leg chains ending ankle-foot).  Entry j is the
# capture index feeding model joint j.  Dropped: both clavicles and the five
# face points (nose, eyes, ears).
DEFAULT_JOINT_MAP = [
    0,   # pelvis
    1,   # spine (navel)
    3,   # neck
    26,  # head
    5,   # left shoulder
    6,   # left elbow
    7,   # left wrist
    8,   # left hand
    12,  # right shoulder
    13,  # right elbow
    14,  # right wrist
    15,  # right hand
    18,  # left hip
    19,  # left knee
    20,  # left ankle
    21,  # left foot
    22,  # right hip
    23,  # right knee
    24,  # right ankle
    25,  # right foot
    2,   # spine (chest)
    9,   # left hand tip
    10,  # left thumb
    16,  # right hand tip
    17,  # right thumb
]


class SampleNameError(ValueError):
    """Malformed sample name."""


class SkeletonFormatError(ValueError):
    """Malformed skeleton CSV content."""


class BundleError(ValueError):
    """Bundle invariant violation or unreadable bundle file."""


_NAME_RE = re.compile(
    r"^(?P<location>[A-Z]{2})(?P<interaction>\d{2})(?P<pair>\d{2})"
    r"_(?P<t_start>\d+(?:\.\d+)?)_(?P<t_end>\d+(?:\.\d+)?)$"
)


@dataclass(frozen=True)
class SampleName:
    """Parsed ``LLIISS_t1_t2`` sample identifier.

    The timestamp strings are kept verbatim so render() reproduces the
    original name exactly ("12.0" never becomes "12").
    """

    location: str
    interaction: int
    pair: int
    t_start: str
    t_end: str

    def __post_init__(self):
        if self.location not in LOCATIONS:
            raise SampleNameError(f"unknown location code {self.location!r}")
        if not 0 <= self.interaction <= 11:
            raise SampleNameError(f"interaction {self.interaction} out of range 0-11")
        if not 1 <= self.pair <= 10:
            raise SampleNameError(f"pair {self.pair} out of range 1-10")
        if float(self.t_start) >= float(self.t_end):
            raise SampleNameError(
                f"t_start {self.t_start} must be < t_end {self.t_end}"
            )

    @property
    def start_seconds(self) -> float:
        return float(self.t_start)

    @property
    def end_seconds(self) -> float:
        return float(self.t_end)

    def render(self) -> str:
        return (
            f"{self.location}{self.interaction:02d}{self.pair:02d}"
            f"_{self.t_start}_{self.t_end}"
        )

    def __str__(self) -> str:
        return self.render()


def parse_sample_name(name: str) -> SampleName:
    m = _NAME_RE.match(name)
    if m is None:
        raise SampleNameError(f"{name!r} does not match LLIISS_t1_t2")
    return SampleName(
        location=m.group("location"),
        interaction=int(m.group("interaction")),
        pair=int(m.group("pair")),
        t_start=m.group("t_start"),
        t_end=m.group("t_end"),
    )


@dataclass
class SampleRecord:
    """One annotated sample: name, activity label, and skeleton array."""

    frame_dir: str
    label: int
    total_frames: int
    keypoint: np.ndarray  # (T, M, V, C) float32

    def validate(self):
        if self.keypoint.ndim != 4:
            raise BundleError(f"{self.frame_dir}: keypoint must be 4-axis")
        if self.total_frames != self.keypoint.shape[0]:
            raise BundleError(
                f"{self.frame_dir}: total_frames {self.total_frames} != "
                f"T {self.keypoint.shape[0]}"
            )
        if not 0 <= self.label <= 11:
            raise BundleError(f"{self.frame_dir}: label {self.label} out of range")
        if not np.all(np.isfinite(self.keypoint)):
            raise BundleError(f"{self.frame_dir}: non-finite keypoint values")


@dataclass
class DatasetBundle:
    """Split lists plus all sample records."""

    train_names: list = field(default_factory=list)
    val_names: list = field(default_factory=list)
    records: list = field(default_factory=list)

    def validate(self):
        train, val = set(self.train_names), set(self.val_names)
        if train & val:
            raise BundleError(f"names in both splits: {sorted(train & val)[:5]}")
        by_name = {}
        for rec in self.records:
            rec.validate()
            if rec.frame_dir in by_name:
                raise BundleError(f"duplicate record {rec.frame_dir}")
            by_name[rec.frame_dir] = rec
        listed = train | val
        if listed != set(by_name):
            missing = sorted(set(by_name) - listed)[:5]
            orphans = sorted(listed - set(by_name))[:5]
            raise BundleError(
                f"split/record mismatch: unlisted records {missing}, "
                f"names without records {orphans}"
            )

    def record_map(self) -> dict:
        return {rec.frame_dir: rec for rec in self.records}

    def labels(self) -> set:
        return {rec.label for rec in self.records}


def load_skeleton_csv(path) -> np.ndarray:
    """Load one raw sample CSV into a (T, 2, 32, 3) float32 array.

    Row t flattened in (person, joint, coordinate) order reproduces CSV row t.
    """
    path = Path(path)
    rows = []
    with open(path) as f:
        for i, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != RAW_ROW_WIDTH:
                raise SkeletonFormatError(
                    f"{path.name} row {i}: expected {RAW_ROW_WIDTH} fields, "
                    f"got {len(fields)}"
                )
            try:
                rows.append([np.float32(v) for v in fields])
            except ValueError as e:
                raise SkeletonFormatError(f"{path.name} row {i}: {e}") from None
    if not rows:
        raise SkeletonFormatError(f"{path.name}: empty file")
    data = np.array(rows, dtype=np.float32)
    if not np.all(np.isfinite(data)):
        raise SkeletonFormatError(f"{path.name}: non-finite values")
    return data.reshape(len(rows), RAW_PERSONS, RAW_JOINTS, RAW_COORDS)


def reduce_keypoints(seq: np.ndarray, joint_map=None) -> np.ndarray:
    """Gather the model's joint subset: out[t,m,j,c] = seq[t,m,joint_map[j],c]."""
    if joint_map is None:
        joint_map = DEFAULT_JOINT_MAP
    joint_map = list(joint_map)
    v_in = seq.shape[2]
    if len(set(joint_map)) != len(joint_map):
        raise ValueError("joint_map has duplicate indices")
    if any(not 0 <= j < v_in for j in joint_map):
        raise ValueError(f"joint_map index out of range for V={v_in}")
    return np.ascontiguousarray(seq[:, :, joint_map, :])


def resample_time(seq: np.ndarray, target_t: int) -> np.ndarray:
    """Linear interpolation along the frame axis to exactly target_t frames."""
    if target_t < 1:
        raise ValueError("target_t must be >= 1")
    t = seq.shape[0]
    if t == target_t:
        return seq
    if t == 1:
        return np.repeat(seq, target_t, axis=0)
    src = np.arange(t, dtype=np.float64)
    dst = np.linspace(0.0, t - 1, target_t)
    flat = seq.reshape(t, -1).astype(np.float64)
    out = np.empty((target_t, flat.shape[1]))
    for col in range(flat.shape[1]):
        out[:, col] = np.interp(dst, src, flat[:, col])
    return out.reshape((target_t,) + seq.shape[1:]).astype(seq.dtype)


def cross_subject_split(names):
    """Partition names: (CC, pair 1) and (CM, pair 10) are the test set."""
    train, test = [], []
    for name in names:
        sn = name if isinstance(name, SampleName) else parse_sample_name(name)
        is_test = (sn.location == "CC" and sn.pair == 1) or (
            sn.location == "CM" and sn.pair == 10
        )
        (test if is_test else train).append(str(sn))
    return train, test


def build_bundle(csv_root, joint_map=None, strict=True, target_frames=None) -> DatasetBundle:
    """Scan a directory of per-sample CSVs into a DatasetBundle.

    Record order is sorted by sample name so assembly is deterministic.
    With strict=False, files with unparsable names are skipped with a warning.
    """
    csv_root = Path(csv_root)
    paths = sorted(csv_root.glob("*.csv"))
    if not paths:
        raise BundleError(f"no CSV files under {csv_root}")
    records = []
    for path in paths:
        try:
            sn = parse_sample_name(path.stem)
        except SampleNameError as e:
            if strict:
                raise BundleError(f"{path.name}: {e}") from e
            log.warning("skipping %s: %s", path.name, e)
            continue
        seq = load_skeleton_csv(path)
        seq = reduce_keypoints(seq, joint_map)
        if target_frames is not None:
            seq = resample_time(seq, target_frames)
        records.append(
            SampleRecord(
                frame_dir=str(sn),
                label=sn.interaction,
                total_frames=seq.shape[0],
                keypoint=seq,
            )
        )
    if not records:
        raise BundleError(f"no usable samples under {csv_root}")
    records.sort(key=lambda r: r.frame_dir)
    train, test = cross_subject_split([r.frame_dir for r in records])
    bundle = DatasetBundle(train_names=train, val_names=test, records=records)
    bundle.validate()
    return bundle


def filter_by_labels(bundle: DatasetBundle, labels) -> DatasetBundle:
    """Restrict records and split lists to the given activity labels."""
    labels = set(labels)
    if not labels:
        raise ValueError("label set must be nonempty")
    if not labels <= set(range(12)):
        raise ValueError(f"labels outside 0-11: {sorted(labels - set(range(12)))}")
    keep = {rec.frame_dir for rec in bundle.records if rec.label in labels}
    if not keep:
        log.warning("no samples with labels %s; bundle is empty", sorted(labels))
    out = DatasetBundle(
        train_names=[n for n in bundle.train_names if n in keep],
        val_names=[n for n in bundle.val_names if n in keep],
        records=[r for r in bundle.records if r.frame_dir in keep],
    )
    out.validate()
    return out


def serialize_bundle(bundle: DatasetBundle, path):
    """Write a bundle directory: manifest.json plus one .npy blob per record.

    The .npy format is a little-endian float32 array with a shape header, so
    the container is readable from any language with a minimal parser.
    """
    bundle.validate()
    path = Path(path)
    arrays = path / "arrays"
    arrays.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "train_names": list(bundle.train_names),
        "val_names": list(bundle.val_names),
        "records": [],
    }
    for rec in bundle.records:
        blob = f"{rec.frame_dir}.npy"
        np.save(arrays / blob, rec.keypoint.astype("<f4"))
        manifest["records"].append(
            {
                "frame_dir": rec.frame_dir,
                "label": rec.label,
                "total_frames": rec.total_frames,
                "shape": list(rec.keypoint.shape),
                "file": f"arrays/{blob}",
            }
        )
    with open(path / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)


def deserialize_bundle(path) -> DatasetBundle:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise BundleError(f"{path}: no manifest.json (expected {BUNDLE_FORMAT_VERSION})")
    try:
        with open(manifest_path) as f:
            manifest = json.load(f)
    except (json.JSONDecodeError, OSError) as e:
        raise BundleError(f"{manifest_path}: unreadable manifest: {e}") from e
    version = manifest.get("format_version")
    if version != BUNDLE_FORMAT_VERSION:
        raise BundleError(
            f"{path}: format version {version!r}, expected {BUNDLE_FORMAT_VERSION!r}"
        )
    records = []
    for meta in manifest["records"]:
        blob = path / meta["file"]
        try:
            arr = np.load(blob)
        except (OSError, ValueError) as e:
            raise BundleError(f"{blob}: unreadable array: {e}") from e
        if list(arr.shape) != meta["shape"]:
            raise BundleError(
                f"{blob}: shape {list(arr.shape)} != manifest {meta['shape']}"
            )
        records.append(
            SampleRecord(
                frame_dir=meta["frame_dir"],
                label=meta["label"],
                total_frames=meta["total_frames"],
                keypoint=arr.astype(np.float32),
            )
        )
    bundle = DatasetBundle(
        train_names=manifest["train_names"],
        val_names=manifest["val_names"],
        records=records,
    )
    bundle.validate()
    return bundle


def bundles_equal(a: DatasetBundle, b: DatasetBundle) -> bool:
    """Exact equality, including bit-level array equality."""
    if a.train_names != b.train_names or a.val_names != b.val_names:
        return False
    if len(a.records) != len(b.records):
        return False
    for ra, rb in zip(a.records, b.records):
        if (ra.frame_dir, ra.label, ra.total_frames) != (
            rb.frame_dir,
            rb.label,
            rb.total_frames,
        ):
            return False
        if ra.keypoint.shape != rb.keypoint.shape:
            return False
        if ra.keypoint.tobytes() != rb.keypoint.tobytes():
            return False
    return True
