# Core utilities for Toeplitz Lab
