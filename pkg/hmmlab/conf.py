"""Lab defaults from Django settings."""
from dataclasses import dataclass

from django.conf import settings

DEFAULTS = {
    'KLD_SAMPLES': 2000,
    'THREADS': 1,
    'FRAME': (512, 384),
    'FACE_REGION': (300, 350),
    'KLD_THRESHOLD': 0.05,
    'OVERLAP_THRESHOLD': 0.10,
}


@dataclass(frozen=True)
class LabSettings:
    kld_samples: int
    threads: int
    frame: tuple
    face_region: tuple
    kld_threshold: float
    overlap_threshold: float


def lab_settings():
    merged = {**DEFAULTS, **getattr(settings, 'HMMLAB', {})}
    return LabSettings(
        kld_samples=int(merged['KLD_SAMPLES']),
        threads=max(1, int(merged['THREADS'])),
        frame=tuple(merged['FRAME']),
        face_region=tuple(merged['FACE_REGION']),
        kld_threshold=float(merged['KLD_THRESHOLD']),
        overlap_threshold=float(merged['OVERLAP_THRESHOLD']),
    )
