"""Shooting toolkit for rotationally symmetric lambda-hypersurfaces."""
