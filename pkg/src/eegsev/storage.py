"""Binary file formats for raw recordings and per-subject feature stores.

Raw recording (.eegr), little-endian:
    magic "EEGR", u32 version=1, u32 channels, u32 samples, f64 sample_rate,
    i32 score (-1 = absent), u8 scale (0=PHQ9, 1=BDI), row-major f32 signal.

Feature store (.defs), one file per subject:
    magic "DEFS", u32 version=1, u16 id length + UTF-8 id, u32 epochs,
    u32 channels, u32 bands, u8 label, row-major f32 features.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .features import BDI, PHQ9, FeatureSample, RawRecording, SubjectDataset

_SCALE_CODE = {PHQ9: 0, BDI: 1}
_CODE_SCALE = {v: k for k, v in _SCALE_CODE.items()}


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated file while reading {what}")
    return buf


def write_raw_recording(rec: RawRecording, path: str | Path) -> None:
    channels, samples = rec.signal.shape
    score = -1 if rec.score is None else int(rec.score)
    with open(path, "wb") as fh:
        fh.write(b"EEGR")
        fh.write(struct.pack("<III", 1, channels, samples))
        fh.write(struct.pack("<dib", rec.sample_rate_hz, score,
                             _SCALE_CODE[rec.scale]))
        fh.write(rec.signal.astype("<f4").tobytes())


def read_raw_recording(path: str | Path, subject_id: str | None = None) -> RawRecording:
    path = Path(path)
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != b"EEGR":
            raise FormatError(f"{path}: bad magic, not a raw recording")
        version, channels, samples = struct.unpack("<III", _read_exact(fh, 12, "header"))
        if version != 1:
            raise FormatError(f"{path}: unsupported version {version}")
        fs, score, scale_code = struct.unpack("<dib", _read_exact(fh, 13, "header"))
        if scale_code not in _CODE_SCALE:
            raise FormatError(f"{path}: unknown scale code {scale_code}")
        payload = _read_exact(fh, channels * samples * 4, "signal")
        sig = np.frombuffer(payload, dtype="<f4").reshape(channels, samples)
    return RawRecording(
        subject_id=subject_id or path.stem,
        sample_rate_hz=fs,
        signal=sig.astype(np.float64),
        score=None if score < 0 else score,
        scale=_CODE_SCALE[scale_code],
    )


def write_feature_store(ds: SubjectDataset, path: str | Path) -> None:
    arr = ds.feature_array().astype("<f4")
    epochs, channels, bands = arr.shape
    sid = ds.subject_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(b"DEFS")
        fh.write(struct.pack("<IH", 1, len(sid)))
        fh.write(sid)
        fh.write(struct.pack("<IIIB", epochs, channels, bands, ds.label))
        fh.write(arr.tobytes())


def read_feature_store(path: str | Path) -> SubjectDataset:
    path = Path(path)
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != b"DEFS":
            raise FormatError(f"{path}: bad magic, not a feature store")
        version, id_len = struct.unpack("<IH", _read_exact(fh, 6, "header"))
        if version != 1:
            raise FormatError(f"{path}: unsupported version {version}")
        sid = _read_exact(fh, id_len, "subject id").decode("utf-8")
        epochs, channels, bands, label = struct.unpack(
            "<IIIB", _read_exact(fh, 13, "header"))
        payload = _read_exact(fh, epochs * channels * bands * 4, "features")
        arr = np.frombuffer(payload, dtype="<f4").reshape(epochs, channels, bands)
    samples = [
        FeatureSample(sid, i, arr[i].astype(np.float64), label)
        for i in range(epochs)
    ]
    return SubjectDataset(sid, label, samples)


def load_feature_dir(directory: str | Path) -> list[SubjectDataset]:
    """All .defs files in a directory, sorted by filename."""
    directory = Path(directory)
    files = sorted(directory.glob("*.defs"))
    if not files:
        raise FormatError(f"no feature stores (*.defs) found in {directory}")
    return [read_feature_store(f) for f in files]
