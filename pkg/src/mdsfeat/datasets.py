"""Dataset generation and image ingestion."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import IngestionError, InvalidArgumentError
from .numeric import make_rng

log = logging.getLogger(__name__)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
LUMA = np.array([0.299, 0.587, 0.114])
UIUC_SHAPE = (40, 100)
IMAGE_SUFFIXES = {".pgm", ".png"}


@dataclass(frozen=True)
class SwissRollSpec:
    n: int = 591
    noise: float = 0.0
    seed: int = 0
    t_range: tuple = (1.5 * np.pi, 4.5 * np.pi)
    height: float = 20.0
    jitter: float = 0.25

    def __post_init__(self):
        if self.n < 4:
            raise InvalidArgumentError("a swiss roll needs at least 4 points")
        if self.noise < 0:
            raise InvalidArgumentError("noise must be >= 0")


def _spiral_arclength(t):
    return 0.5 * (t * np.sqrt(1.0 + t * t) + np.arcsinh(t))


def swiss_roll(spec=SwissRollSpec()):
    """Points ``(t cos t, h, t sin t)`` spread near-uniformly over the sheet.

    Point k sits at arc-length fraction (k + 1/2 + jitter)/n along the spiral
    and at height frac(k * golden ratio) of the sheet, a lattice with no
    clumping in either direction. ``jitter`` (in lattice cells) and ``noise``
    (isotropic Gaussian, in coordinate units) are drawn from the seed.
    """
    rng = make_rng(spec.seed)
    n = spec.n
    k = np.arange(n, dtype=np.float64)
    ju = rng.uniform(-spec.jitter, spec.jitter, size=n)
    jv = rng.uniform(-spec.jitter, spec.jitter, size=n)
    u = np.clip((k + 0.5 + ju) / n, 0.0, 1.0)
    v = np.mod(k * GOLDEN + jv / np.sqrt(n), 1.0)

    t_lo, t_hi = spec.t_range
    grid = np.linspace(t_lo, t_hi, 4096)
    s = _spiral_arclength(grid)
    t = np.interp(s[0] + u * (s[-1] - s[0]), s, grid)
    pts = np.column_stack([t * np.cos(t), v * spec.height, t * np.sin(t)])
    if spec.noise > 0:
        pts += rng.normal(0.0, spec.noise, size=pts.shape)
    return pts


@dataclass
class LabeledImageSet:
    images: list
    labels: np.ndarray  # +1 for the positive ("car") class, -1 otherwise, or class ids
    paths: list = field(default_factory=list)
    class_names: tuple = ()
    layout: str = ""

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if len(self.images) != len(self.labels):
            raise InvalidArgumentError("images and labels differ in length")

    def __len__(self):
        return len(self.images)

    def stack(self):
        """All images as one (n, h, w) array; requires equal sizes."""
        shapes = {im.shape for im in self.images}
        if len(shapes) != 1:
            raise IngestionError(f"images have differing sizes: {sorted(shapes)}")
        return np.stack(self.images)

    def content_hash(self):
        from .distances import content_hash

        return content_hash(self.labels.astype(np.int64), *self.images)


def read_gray(path):
    """Read a PGM/PNG file as float intensities in [0, 1]."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.asarray(im)
    except Exception as exc:  # PIL raises a zoo of types
        raise IngestionError(f"cannot read image {path}: {exc}") from exc
    if mode in ("RGB", "RGBA"):
        arr = arr[..., :3].astype(np.float64) @ LUMA / 255.0
    elif mode in ("L", "P"):
        arr = arr.astype(np.float64) / 255.0
    elif mode == "LA":
        arr = arr[..., 0].astype(np.float64) / 255.0
    elif mode in ("I", "I;16", "I;16B", "I;16L"):
        arr = arr.astype(np.float64)
        top = 65535.0 if arr.max() > 255 else 255.0
        arr = arr / top
    elif mode == "1":
        arr = arr.astype(np.float64)
    else:
        raise IngestionError(f"unsupported image mode {mode} in {path}")
    if arr.ndim != 2:
        raise IngestionError(f"image {path} is not single-channel after conversion")
    return arr


def _uiuc_files(root):
    for cand in (root / "TrainImages", root):
        if cand.is_dir():
            files = sorted(p for p in cand.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
            pos = [p for p in files if p.name.lower().startswith("pos")]
            neg = [p for p in files if p.name.lower().startswith("neg")]
            if pos or neg:
                return pos, neg
    return [], []


def load_image_dataset(root, layout="uiuc"):
    """Load a labelled gray image set.

    layout
        ``"uiuc"``: files named ``pos-*`` (cars, label +1) and ``neg-*``
        (label -1) directly under ``root`` or ``root/TrainImages``; every
        image must be 40x100.
        ``"class-per-directory"``: one subdirectory per class; labels are
        class indices in sorted directory order.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"not a directory: {root}")
    images, labels, paths = [], [], []
    if layout == "uiuc":
        pos, neg = _uiuc_files(root)
        entries = [(p, 1) for p in pos] + [(p, -1) for p in neg]
        names = ("car", "non-car")
    elif layout == "class-per-directory":
        dirs = sorted(p for p in root.iterdir() if p.is_dir())
        names = tuple(d.name for d in dirs)
        entries = [
            (p, ci)
            for ci, d in enumerate(dirs)
            for p in sorted(d.iterdir())
            if p.suffix.lower() in IMAGE_SUFFIXES
        ]
    else:
        raise InvalidArgumentError(f"unknown layout {layout!r}")
    if not entries:
        raise IngestionError(f"no images found under {root} (layout {layout})")
    for path, lab in entries:
        img = read_gray(path)
        if layout == "uiuc" and img.shape != UIUC_SHAPE:
            raise IngestionError(f"{path} is {img.shape[0]}x{img.shape[1]}, expected 40x100")
        images.append(img)
        labels.append(lab)
        paths.append(str(path))
    log.info("loaded %d images from %s", len(images), root)
    return LabeledImageSet(images, np.array(labels), paths, names, layout)


def write_pgm(path, img):
    arr = np.clip(np.round(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def synthetic_car_images(n_pos=55, n_neg=50, shape=UIUC_SHAPE, seed=0):
    """A toy stand-in for the car set: side-view "vehicle" silhouettes
    (body, cabin and two wheels, random position and direction) versus
    textured clutter of random rectangles and strokes."""
    rng = make_rng(seed)
    h, w = shape
    rr, cc = np.mgrid[0:h, 0:w].astype(np.float64)
    images, labels = [], []
    for label, count in ((1, n_pos), (-1, n_neg)):
        for _ in range(count):
            img = 0.55 + 0.08 * rng.standard_normal() + 0.03 * rng.standard_normal(shape)
            if label == 1:
                cx = w / 2 + rng.uniform(-8, 8)
                base = h * 0.72 + rng.uniform(-3, 3)
                half = rng.uniform(30, 40)
                shade = rng.uniform(0.1, 0.3)
                body = (np.abs(cc - cx) < half) & (rr > base - 10) & (rr < base)
                off = rng.choice([-1, 1]) * half * 0.2
                cabin = (np.abs(cc - cx - off) < half * 0.5) & (rr > base - 18) & (rr <= base - 10)
                img[body | cabin] = shade
                for wx in (cx - half * 0.65, cx + half * 0.65):
                    img[(rr - base) ** 2 + (cc - wx) ** 2 < 30] = 0.05
            else:
                for _ in range(rng.integers(3, 8)):
                    r0, c0 = rng.integers(0, h - 4), rng.integers(0, w - 4)
                    r1, c1 = r0 + rng.integers(3, h // 2), c0 + rng.integers(3, w // 3)
                    img[r0:r1, c0:c1] = rng.uniform(0.0, 1.0)
                for _ in range(rng.integers(2, 6)):
                    a = rng.uniform(0, np.pi)
                    r0, c0 = rng.uniform(0, h), rng.uniform(0, w)
                    dist = np.abs((rr - r0) * np.cos(a) - (cc - c0) * np.sin(a))
                    img[dist < 1.0] = rng.uniform(0.0, 1.0)
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(label)
    return LabeledImageSet(images, np.array(labels), [], ("car", "non-car"), "synthetic")


def write_uiuc_layout(dataset, root):
    """Write a +1/-1 labelled set as pos-*.pgm / neg-*.pgm files."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    counts = {1: 0, -1: 0}
    for img, lab in zip(dataset.images, dataset.labels):
        prefix = "pos" if lab == 1 else "neg"
        write_pgm(root / f"{prefix}-{counts[int(lab)]}.pgm", img)
        counts[int(lab)] += 1
    return root
