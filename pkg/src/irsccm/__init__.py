"""Cascade-channel covariance estimation and two-timescale beamforming for
IRS-assisted mmWave links: multi-level Toeplitz structure, compressed
training, ADMM covariance recovery, SDR phase design, and a sweep harness."""

__version__ = "0.1.0"
