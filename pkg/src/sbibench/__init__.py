"""Scene background initialization: estimation methods, an eight-metric
evaluation suite, deterministic synthetic scenes, and a benchmark harness."""

from .bench import (EvaluationMatrix, SequenceAggregate, build_method,
                    load_reference_matrix, median_by_sequence,
                    parse_matrix_csv, rank_sequences, render, run)
from .bgmethods import (BlockMrfParams, SobsParams, WS2006Params,
                        blockmrf_background, median_background,
                        sobs_background, ws2006_background)
from .metrics import (MetricConfig, MetricReport, age, ceps, compute_all,
                      cqm, eps, error_mask, ms_ssim, p_ceps, p_eps, psnr)
from .seqio import (BootstrapSequence, SequenceSpec, SignedPlanes,
                    load_image, load_manifest, load_sequence, luminance,
                    rct_forward, rct_inverse, save_image)
from .synth import Occluder, SceneScript, generate, load_scene_script, occupancy_map

__version__ = "0.1.0"
