"""Anisotropic nonlocal mean curvature, periodic perimeter and Delaunay near-cylinder branches in the plane."""
