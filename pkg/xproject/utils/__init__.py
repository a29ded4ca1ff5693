"""Small helpers shared across xproject: masking, seeded randomness, line records."""
