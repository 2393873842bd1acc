"""mocaplink: stream motion-capture rigid-body poses to robots as MAVLink localization packets.

The pipeline: a mocap source (simulator, replay log, or live UDP ingest)
feeds per-object constant-velocity Kalman filters owned by a Station; any
number of Sender tasks read the shared track registry at their own rates,
transform poses into NED / geodetic coordinates, and emit HIL_GPS,
LOCAL_POSITION_NED and ATT_POS_MOCAP frames over UDP.
"""

__version__ = "0.1.0"
