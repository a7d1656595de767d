"""Repository module for relhyp: group specs and report documents."""
