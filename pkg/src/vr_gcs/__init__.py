"""Simulated hexacopter ground station with live environment streaming.

Subpackages by concern: dynamics (rigid body simulation), controller
(cascaded geometric control + pilot command tracking), world/mapping
(synthetic scenes, depth rendering, voxel reconstruction), protocol
(JSON + binary wire formats), sim/server (headless core and the network
service), telemetry (latency stats and mission grading).
"""

__version__ = "0.1.0"
