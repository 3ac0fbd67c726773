"""ramcell: planner and simulator for a robot-mounted UV-resin extrusion cell."""

__version__ = "0.1.0"
