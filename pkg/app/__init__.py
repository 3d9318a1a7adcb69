# Toeplitz Lab
