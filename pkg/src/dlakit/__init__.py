"""Non-neural tooling for multi-task document layout analysis.

PAGE-XML handling, proposal geometry, baseline/text-line conversions,
inference post-processing and region/baseline evaluation metrics.
"""

from .baselines import (LineGeometryConfig, baseline_to_polygon, estimate_interline,
                        normalize_baseline, polygon_to_baseline)
from .detections import Detection, read_detections, write_detections
from .geometry import BBox, BitMask, LabelMap, bbox_iou, mask_iou, paint_label_map, rasterize
from .metrics import (BaselineScore, ConfusionMatrix, accumulate_confusion, baseline_prf,
                      evaluate_page_pair, fw_iou, mean_iou)
from .page_model import (Baseline, Page, Polygon, Region, TextLine, corpus_stats, parse_page_xml,
                         read_page, write_page, write_page_xml)
from .pipeline import PipelineConfig, post_process
from .proposals import (anchor_grid, anchor_shapes, combine_losses, decode_delta, encode_delta,
                        filter_by_score, nms, select_rois)
from .synth import SynthSpec, generate_synthetic_page

__version__ = "0.1.0"
