"""ROMP: lossless JPEG recompression with corpus-trained context tables,
an optional perceptually-bounded lossy pass (L-ROMP), and an analytical
cache-benefit estimator."""

from .cache_model import (CacheModelInputs, LatencyHistogram,
                          bandwidth_reductions, combined_latency,
                          effective_cache_size, replication_savings,
                          request_shares)
from .codec import (CodingHistory, RompContainer, decode_block, encode_block,
                    romp_decode, romp_encode)
from .context import (ContextParams, ContextTriple, bucketize, inter_energy,
                      intra_energy)
from .jpeg_io import (JpegFile, QuantizedImage, RunsizeSymbol, entropy_decode,
                      entropy_encode, parse_jpeg, runsize_scan)
from .metrics import (CompressionStats, block_ssim, compression_ratio, psnr,
                      reconstruct_pixels)
from .threshold import (ThresholdParams, bits_saved, mse_increase, ssim_floor,
                        threshold_block, threshold_image)
from .training import (ContextTableSet, SymbolHistogram, accumulate,
                       build_tables, fit_buckets, load_table_set,
                       save_table_set, train_tables)

__version__ = "0.1.0"
