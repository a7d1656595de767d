"""Domain models and algorithms for relhyp."""
