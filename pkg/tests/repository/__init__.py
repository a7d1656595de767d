"""Repository test module for relhyp."""
