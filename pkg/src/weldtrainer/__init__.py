"""Arc-welding trainer engine.

Localizes the weld seam from a point cloud, tracks the electric arc in
glare-saturated frames behind a tile-confidence gate, and scores a
trainee's pass against a moving target point, with a deterministic
simulator and record/replay for every pipeline stage.
"""

from .confidence import (ConfidenceMap, ConfidenceTracker, TileGrid,
                         classify_tiles, normalize_map, partition_tiles,
                         softmax_update, update_confidence)
from .core import (CameraIntrinsics, GrayFrame, ImagePoint, LineSegment,
                   PointCloud, euclidean_distance, normalize_intensity)
from .errors import (AmbiguousSeam, CorruptRecord, DegenerateContour,
                     DegenerateTarget, DepthHole, InsufficientMotion,
                     InvalidConfig, NoArcDetected, NoCandidateLines,
                     NoGrooveFound, OutOfOrderFrame, ShapeMismatch,
                     TooFewFrames, UnknownSession, WeldError)
from .guidance import (Cue, CueColor, Direction, DirectionEstimate,
                       TargetSchedule, TrialReport, average_error, cue,
                       estimate_direction, oriented_path, project_arc_length,
                       score, target_point)
from .seam import (GrooveSegment, SeamConfig, SeamLine, SeamPath, SeamReport,
                   classify_endpoints_and_fit, denoise, detect_edges,
                   extract_segments, filter_segments, lift_to_3d,
                   localize_seam, project_to_image, segment_groove)
from .session import (GuidanceUpdate, ParsedRecord, Session, SessionConfig,
                      SessionService, Subscriber, parse_record, replay)
from .sim import (GroundTruthLog, Scenario, TrueSeam, WorkpieceSpec,
                  build_workpiece, parse_scenario, preset_scenario,
                  render_hdr_frame, run_scenario, scenario_to_text)
from .tracking import (ArcEstimate, CircleFit, Contour, Kalman2D, TrackerState,
                       baseline_contour_center, baseline_intensity_centers,
                       binarize, confidence_gate, contour_area,
                       dimension_filter, extract_contours,
                       min_enclosing_circle, track_arc)

__version__ = "0.1.0"
