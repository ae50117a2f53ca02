"""Fixed-confidence best-arm identification with multi-fidelity observations."""
