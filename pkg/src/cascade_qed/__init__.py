"""Single-excitation dynamics and emission spectra of fiber-linked atom-microtoroid chains."""
