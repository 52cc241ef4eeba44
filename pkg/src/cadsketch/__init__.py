"""cadsketch: CAD meshes to sketch images, sketch quality measures, and
sketch-query retrieval with a full evaluation harness."""

from .errors import (CadSketchError, DegenerateMesh, DimensionMismatch,
                     DimensionNotDivisible, DuplicateModelId, EmptyCorpus,
                     EmptyIndex, ImageTooSmall, InvalidParams, MalformedFile,
                     MissingReference, MissingViews, UnsupportedFormat)
from .hog import HogParams, compute_descriptor, extract_bag, hog
from .image import GrayImage, load_png, resize_bilinear, save_png
from .mesh_io import TriangleMesh, load_mesh, normalize_mesh, parse_mesh
from .metrics import (MetricReport, compare_corpus, compare_pair, entropy,
                      mse, ms_ssim, psnr, psnr_from_mse, uqi, vif)
from .retrieval import (EvalReport, FeatureBag, QueryRecord, RankedResult,
                        build_index, evaluate, mean_average_precision,
                        precision_recall, query, topk_accuracy)
from .sketch import (SketchParams, binary_threshold, canny, dodge_divide,
                     edge_gradient, gaussian_blur, generate_sketch, invert)
from .view_render import (ViewSet, Viewpoint, dodecahedron_viewpoints,
                          render_all_views, render_view,
                          select_representative)

__version__ = "0.1.0"
