"""File formats for pipeline stages.

  Scene coordinates: "SCRD1\\n" + "W H 3\\n" + little-endian float32,
    row-major, channel-interleaved; NaN marks invalid pixels.
  Labels: "LBLS1\\n" + "W H\\n" + little-endian uint32 per pixel.
  Instance map: JSON {"labels": [{"id", "mean", "W", "count"}], "label_count"}
    with "W" the 3x3 unwhitening matrix in row-major order.
  Scene: JSON {"seed", "buildings": [{"center", "half_extents", "yaw",
    "label"}], "road_segments"}.
  Point clouds: ASCII PLY with float x, y, z and uint instance_label.
  Poses: JSON Lines, see geometry.save_poses_jsonl; estimate files add
    "inliers" and "mean_residual_deg" per record.

All writers are deterministic: identical inputs give identical bytes.
"""

import json

import numpy as np

from .geometry import Pose, quaternion_to_rotation, rotation_to_quaternion
from .images import LabelImage, SceneCoordinateImage
from .instance_map import InstanceMap, WhiteningTransform
from .images import NUM_CLASS_LABELS
from .scene_sim import CityScene, Cuboid

__all__ = [
    "save_coords",
    "load_coords",
    "save_labels",
    "load_labels",
    "save_instance_map",
    "load_instance_map",
    "save_scene",
    "load_scene",
    "save_ply",
    "load_ply",
    "save_estimates_jsonl",
    "load_estimates_jsonl",
]

_COORD_MAGIC = b"SCRD1\n"
_LABEL_MAGIC = b"LBLS1\n"


def save_coords(path, image: SceneCoordinateImage) -> None:
    data = np.ascontiguousarray(image.coords, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_COORD_MAGIC)
        fh.write(f"{image.width} {image.height} 3\n".encode("ascii"))
        fh.write(data.tobytes())


def load_coords(path) -> SceneCoordinateImage:
    with open(path, "rb") as fh:
        magic = fh.read(len(_COORD_MAGIC))
        if magic != _COORD_MAGIC:
            raise ValueError(f"{path}: not a scene-coordinate file")
        width, height, channels = (int(x) for x in fh.readline().split())
        if channels != 3:
            raise ValueError(f"{path}: expected 3 channels, got {channels}")
        raw = fh.read(width * height * 3 * 4)
    arr = np.frombuffer(raw, dtype="<f4").reshape(height, width, 3)
    return SceneCoordinateImage(arr.astype(np.float64))


def save_labels(path, image: LabelImage) -> None:
    data = np.ascontiguousarray(image.labels, dtype="<u4")
    with open(path, "wb") as fh:
        fh.write(_LABEL_MAGIC)
        fh.write(f"{image.width} {image.height}\n".encode("ascii"))
        fh.write(data.tobytes())


def load_labels(path) -> LabelImage:
    with open(path, "rb") as fh:
        magic = fh.read(len(_LABEL_MAGIC))
        if magic != _LABEL_MAGIC:
            raise ValueError(f"{path}: not a label file")
        width, height = (int(x) for x in fh.readline().split())
        raw = fh.read(width * height * 4)
    arr = np.frombuffer(raw, dtype="<u4").reshape(height, width)
    return LabelImage(arr.copy())


def save_instance_map(path, imap: InstanceMap) -> None:
    records = []
    for label in imap.instance_labels():
        tf = imap.get(label)
        records.append({
            "id": int(label),
            "mean": [float(x) for x in tf.mean],
            "W": [float(x) for x in tf.unwhiten_matrix.reshape(-1)],
            "count": int(tf.point_count),
        })
    doc = {"labels": records, "label_count": int(imap.label_count)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_instance_map(path) -> InstanceMap:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    transforms = {}
    for rec in doc["labels"]:
        unwhiten_matrix = np.array(rec["W"], dtype=np.float64).reshape(3, 3)
        transforms[int(rec["id"])] = WhiteningTransform(
            label=int(rec["id"]),
            mean=np.array(rec["mean"], dtype=np.float64),
            unwhiten_matrix=unwhiten_matrix,
            whiten_matrix=np.linalg.inv(unwhiten_matrix),
            point_count=int(rec["count"]),
        )
    label_count = int(doc.get("label_count", NUM_CLASS_LABELS + len(transforms)))
    return InstanceMap(transforms, label_count)


def save_scene(path, scene: CityScene) -> None:
    doc = {
        "seed": int(scene.seed),
        "buildings": [
            {
                "center": [float(x) for x in b.center],
                "half_extents": [float(x) for x in b.half_extents],
                "yaw": float(b.yaw),
                "label": int(b.label),
            }
            for b in scene.buildings
        ],
        "road_segments": int(scene.road_segments),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_scene(path) -> CityScene:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    buildings = tuple(
        Cuboid(
            center=np.array(rec["center"], dtype=np.float64),
            half_extents=np.array(rec["half_extents"], dtype=np.float64),
            yaw=float(rec["yaw"]),
            label=int(rec["label"]),
        )
        for rec in doc["buildings"]
    )
    return CityScene(buildings, int(doc["road_segments"]), int(doc["seed"]))


def save_ply(path, points: np.ndarray, labels: np.ndarray) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    labs = np.asarray(labels).reshape(-1)
    if pts.shape[0] != labs.shape[0]:
        raise ValueError("points and labels must have matching lengths")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {pts.shape[0]}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("property uint instance_label\n")
        fh.write("end_header\n")
        for (x, y, z), lab in zip(pts, labs):
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r} {int(lab)}\n")


def load_ply(path):
    """Returns (points (N, 3), labels (N,))."""
    with open(path, "r", encoding="ascii") as fh:
        line = fh.readline().strip()
        if line != "ply":
            raise ValueError(f"{path}: not a PLY file")
        n_vertices = None
        properties = []
        while True:
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: truncated PLY header")
            line = line.strip()
            if line.startswith("element vertex"):
                n_vertices = int(line.split()[-1])
            elif line.startswith("property"):
                properties.append(line.split()[-1])
            elif line == "end_header":
                break
        required = ["x", "y", "z", "instance_label"]
        if properties != required:
            raise ValueError(f"{path}: expected properties {required}, got {properties}")
        points = np.empty((n_vertices, 3))
        labels = np.empty(n_vertices, dtype=np.uint32)
        for i in range(n_vertices):
            parts = fh.readline().split()
            points[i] = [float(parts[0]), float(parts[1]), float(parts[2])]
            labels[i] = int(parts[3])
    return points, labels


def save_estimates_jsonl(path, records) -> None:
    """Write per-frame estimate records.

    Each record is (frame, pose | None, inliers, mean_residual_deg,
    failure_reason | None); failed frames get {"failed": true}.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for frame, pose, inliers, mean_residual, reason in records:
            if pose is None:
                rec = {"frame": str(frame), "failed": True, "reason": str(reason)}
            else:
                rec = {
                    "frame": str(frame),
                    "q": [float(x) for x in rotation_to_quaternion(pose.rotation)],
                    "t": [float(x) for x in pose.translation],
                    "inliers": int(inliers),
                    "mean_residual_deg": float(mean_residual),
                }
            fh.write(json.dumps(rec) + "\n")


def load_estimates_jsonl(path) -> list:
    """Read [(frame, Pose | None, inliers, mean_residual_deg, reason)]."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("failed"):
                out.append((rec["frame"], None, 0, float("nan"), rec.get("reason", "")))
            else:
                pose = Pose(quaternion_to_rotation(np.array(rec["q"])), np.array(rec["t"]))
                out.append((rec["frame"], pose, int(rec.get("inliers", 0)),
                            float(rec.get("mean_residual_deg", float("nan"))), None))
    return out
