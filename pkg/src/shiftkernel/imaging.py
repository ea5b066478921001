"""Parallel-beam Radon transform, filtered backprojection, blur kernels and PGM I/O.

Geometry: pixel ``(row, col)`` sits at ``x = col - (w-1)/2``, ``y = row - (h-1)/2``.
The projection at angle ``theta`` and offset ``s`` integrates the image along
the line ``{(s cos(theta) - t sin(theta), s sin(theta) + t cos(theta))}``.
Detector offsets are ``n_det`` bins spanning the image diagonal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.signal
from scipy.ndimage import map_coordinates

from ._validation import ValidationError

LUMA = (0.299, 0.587, 0.114)


class PNMError(ValidationError):
    """Malformed or truncated PGM/PPM data."""


@dataclass(frozen=True)
class GrayImage:
    """Grayscale pixels in ``[0, 1]`` (clamped on construction)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise ValidationError(f"image must be a non-empty 2-D array, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValidationError("image contains non-finite pixels")
        object.__setattr__(self, "pixels", np.clip(px, 0.0, 1.0))

    @property
    def h(self):
        return self.pixels.shape[0]

    @property
    def w(self):
        return self.pixels.shape[1]


@dataclass(frozen=True)
class Sinogram:
    """Projection data of shape ``(n_det, n_ang)`` with uniform angles in ``[0, pi)``."""

    data: np.ndarray
    angles: np.ndarray
    spacing: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        angles = np.asarray(self.angles, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise ValidationError(f"sinogram must be a non-empty 2-D array, got {data.shape}")
        if angles.shape != (data.shape[1],):
            raise ValidationError(
                f"sinogram has {data.shape[1]} columns but {angles.shape[0]} angles"
            )
        if self.spacing <= 0:
            raise ValidationError("detector spacing must be positive")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "angles", angles)

    @property
    def n_det(self):
        return self.data.shape[0]

    @property
    def n_ang(self):
        return self.data.shape[1]

    def offsets(self):
        return detector_offsets(self.n_det, self.spacing)

    def meta(self):
        return {"n_ang": self.n_ang, "n_det": self.n_det, "spacing": self.spacing}

    @classmethod
    def for_image_shape(cls, data, h, w):
        data = np.asarray(data, dtype=np.float64)
        return cls(data, projection_angles(data.shape[1]), np.hypot(h, w) / data.shape[0])


def projection_angles(n_ang):
    return np.arange(n_ang) * (np.pi / n_ang)


def detector_offsets(n_det, spacing):
    return (np.arange(n_det) - (n_det - 1) / 2.0) * spacing


def _pixels(img):
    px = img.pixels if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64)
    if px.ndim != 2 or px.size == 0:
        raise ValidationError(f"image must be a non-empty 2-D array, got shape {px.shape}")
    return px


def radon(img, n_ang, n_det) -> Sinogram:
    """Line integrals of ``img`` at ``n_ang`` uniform angles and ``n_det`` offsets.

    Samples along each line are taken at unit-ish spacing with bilinear
    interpolation (zero outside the image) and summed.
    """
    px = _pixels(img)
    if n_ang < 1 or n_det < 1:
        raise ValidationError("n_ang and n_det must be >= 1")
    h, w = px.shape
    diag = np.hypot(h, w)
    ds = diag / n_det
    s = detector_offsets(n_det, ds)
    n_t = int(np.ceil(diag))
    dt = diag / n_t
    t = (np.arange(n_t) - (n_t - 1) / 2.0) * dt
    theta = projection_angles(n_ang)
    c, sn = np.cos(theta)[None, :, None], np.sin(theta)[None, :, None]
    S, T = s[:, None, None], t[None, None, :]
    x = S * c - T * sn
    y = S * sn + T * c
    rows = y + (h - 1) / 2.0
    cols = x + (w - 1) / 2.0
    vals = map_coordinates(px, [rows.ravel(), cols.ravel()], order=1, mode="constant", cval=0.0)
    data = vals.reshape(n_det, n_ang, n_t).sum(axis=2) * dt
    return Sinogram(data=data, angles=theta, spacing=ds)


def ramp_filter(data, spacing):
    """Convolve each column with the ramp filter ``|xi|`` in the Fourier domain.

    Columns are zero-padded to the next power of two that is at least twice
    the detector count.
    """
    n_det = data.shape[0]
    size = int(2 ** np.ceil(np.log2(2 * n_det)))
    freqs = np.abs(np.fft.fftfreq(size, d=spacing))
    spec = np.fft.fft(data, n=size, axis=0) * freqs[:, None]
    return np.real(np.fft.ifft(spec, axis=0))[:n_det]


def backproject(filtered, angles, spacing, out_h, out_w):
    n_det = filtered.shape[0]
    s_grid = detector_offsets(n_det, spacing)
    y = (np.arange(out_h) - (out_h - 1) / 2.0)[:, None]
    x = (np.arange(out_w) - (out_w - 1) / 2.0)[None, :]
    out = np.zeros((out_h, out_w))
    # fixed angle order keeps the reduction deterministic
    for k, th in enumerate(angles):
        s = x * np.cos(th) + y * np.sin(th)
        out += np.interp(s.ravel(), s_grid, filtered[:, k], left=0.0, right=0.0).reshape(
            out_h, out_w
        )
    return out * (np.pi / len(angles))


def iradon(sino: Sinogram, out_h, out_w, clamp=True):
    """Filtered backprojection of ``sino`` onto an ``out_h x out_w`` grid.

    With ``clamp=False`` the raw reconstruction is returned as an array;
    otherwise a :class:`GrayImage` clamped to ``[0, 1]``.
    """
    if out_h < 1 or out_w < 1:
        raise ValidationError("output size must be positive")
    span = sino.n_det * sino.spacing
    if np.hypot(out_h, out_w) > span + 2 * sino.spacing + 1e-9:
        raise ValidationError(
            f"{out_h}x{out_w} output exceeds the detector span {span:.2f}"
        )
    raw = backproject(ramp_filter(sino.data, sino.spacing), sino.angles, sino.spacing,
                      out_h, out_w)
    return GrayImage(raw) if clamp else raw


def gaussian_blur_kernel(size=9, sigma=2.0):
    """Normalized ``size x size`` Gaussian kernel (out-of-focus blur)."""
    half = size // 2
    u = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(u[:, None] ** 2 + u[None, :] ** 2) / (2.0 * sigma**2))
    return g / g.sum()


def motion_blur_kernel(size=9):
    """Zeros except the central row, which averages ``size`` pixels horizontally."""
    k = np.zeros((size, size))
    k[size // 2, :] = 1.0 / size
    return k


BLUR_KERNELS = {"gaussian": gaussian_blur_kernel, "motion": motion_blur_kernel}


def blur_kernel(name):
    try:
        return BLUR_KERNELS[name]()
    except KeyError:
        raise ValidationError(f"unknown blur {name!r}; expected one of {sorted(BLUR_KERNELS)}")


def convolve2d(img, kernel):
    """Zero-padded 2-D convolution anchored at the kernel center, same-size output.

    For an even kernel side ``p`` the anchor is index ``(p - 1) // 2``.
    """
    A = np.asarray(img, dtype=np.float64)
    K = np.asarray(kernel, dtype=np.float64)
    if K.ndim != 2 or K.size == 0:
        raise ValidationError("kernel must be a non-empty 2-D array")
    if A.ndim != 2:
        raise ValidationError("image must be 2-D")
    if K.shape[0] > A.shape[0] or K.shape[1] > A.shape[1]:
        raise ValidationError(f"kernel {K.shape} larger than image {A.shape}")
    return scipy.signal.convolve2d(A, K, mode="same", boundary="fill", fillvalue=0.0)


# --------------------------------------------------------------------------- PNM I/O


def _tokens(buf, count, start):
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    out, i = [], start
    n = len(buf)
    while len(out) < count:
        while i < n and buf[i : i + 1].isspace():
            i += 1
        if i < n and buf[i : i + 1] == b"#":
            while i < n and buf[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if i >= n:
            raise PNMError(f"truncated header at byte {i}")
        j = i
        while j < n and not buf[j : j + 1].isspace() and buf[j : j + 1] != b"#":
            j += 1
        tok = buf[i:j]
        if not tok.isdigit():
            raise PNMError(f"malformed header token {tok!r} at byte {i}")
        out.append(int(tok))
        i = j
    return out, i


def decode_pnm(buf: bytes) -> np.ndarray:
    """Decode P2/P5 (gray) or P3/P6 (color, converted to luminance) into ``[0, 1]``."""
    magic = buf[:2]
    if magic not in (b"P2", b"P5", b"P3", b"P6"):
        raise PNMError(f"unsupported magic number {magic!r} at byte 0")
    (w, h, maxval), i = _tokens(buf, 3, 2)
    if w < 1 or h < 1:
        raise PNMError(f"invalid image size {w}x{h} in header ending at byte {i}")
    if not 1 <= maxval <= 65535:
        raise PNMError(f"invalid maxval {maxval} in header ending at byte {i}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = w * h * channels
    if magic in (b"P5", b"P6"):
        if i >= len(buf) or not buf[i : i + 1].isspace():
            raise PNMError(f"missing whitespace after header at byte {i}")
        i += 1
        width = 1 if maxval < 256 else 2
        need = count * width
        if len(buf) - i < need:
            raise PNMError(
                f"truncated payload: expected {need} bytes from byte {i}, got {len(buf) - i}"
            )
        raw = np.frombuffer(buf, dtype=">u1" if width == 1 else ">u2", count=count, offset=i)
        vals = raw.astype(np.float64)
    else:
        try:
            vals_list, _ = _tokens(buf, count, i)
        except PNMError as exc:
            raise PNMError(f"truncated or malformed ASCII payload: {exc}") from None
        vals = np.asarray(vals_list, dtype=np.float64)
    if np.any(vals > maxval):
        raise PNMError(f"sample value exceeds maxval {maxval}")
    vals = vals / maxval
    if channels == 3:
        vals = vals.reshape(h, w, 3) @ np.asarray(LUMA)
        return np.clip(vals, 0.0, 1.0)
    return vals.reshape(h, w)


def read_pgm(path) -> GrayImage:
    return GrayImage(decode_pnm(Path(path).read_bytes()))


def encode_pgm(img) -> bytes:
    px = np.clip(_pixels(img), 0.0, 1.0)
    q = np.floor(px * 255.0 + 0.5).astype(np.uint8)
    h, w = q.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + q.tobytes()


def write_pgm(img, path):
    Path(path).write_bytes(encode_pgm(img))


def save_sinogram(sino: Sinogram, path):
    """Write ``path`` (CSV, rows = detectors) plus a JSON sidecar ``path.json``."""
    path = Path(path)
    np.savetxt(path, sino.data, delimiter=",", fmt="%.17g")
    meta = sino.meta()
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2))


def load_sinogram(path, image_shape=None) -> Sinogram:
    """Read a sinogram CSV; spacing comes from the sidecar or ``image_shape``."""
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    meta_path = Path(str(path) + ".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    n_det, n_ang = data.shape
    if meta and (meta.get("n_det", n_det) != n_det or meta.get("n_ang", n_ang) != n_ang):
        raise ValidationError(f"sinogram {path} shape {data.shape} disagrees with sidecar {meta}")
    spacing = meta.get("spacing")
    if spacing is None:
        if image_shape is None:
            raise ValidationError(f"no detector spacing for {path}; give the image shape")
        spacing = np.hypot(*image_shape) / n_det
    return Sinogram(data, projection_angles(n_ang), float(spacing))
