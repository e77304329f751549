"""Simulation toolkit for electromagnetic interference attacks on spinning time-of-flight LiDAR."""

__version__ = "0.1.0"
