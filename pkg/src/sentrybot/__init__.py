"""Two-node surveillance robot stack: perception post-processing, drive
kinematics, voice-command dialog, framed wire protocol, front agent,
central operator server, and a deterministic simulator standing in for
the physical robot and its sensors."""

__version__ = "0.1.0"
