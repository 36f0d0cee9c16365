"""annzip: lossless compression for the auxiliary data of ANN indexes.

The package provides entropy-coded storage for vector ids in inverted
lists, friend lists in graph indexes, and product-quantization codes,
plus small IVF and graph search indexes that exercise the codecs without
changing search results.
"""

__version__ = "0.1.0"

from .ans import (
    AnsState,
    QuantizedPmf,
    bit_count,
    decode_symbol,
    decode_uniform,
    encode_symbol,
    encode_uniform,
    flush,
    state_init,
    unflush,
    uniform_pmf,
)
from .orderstat import OrderStatSet
from .set_codecs import (
    CompressedIdBlock,
    compact_decode,
    compact_encode,
    ef_access,
    ef_decode,
    ef_encode,
    roc_decode,
    roc_encode,
    theoretical_savings,
    unc_decode,
    unc_encode,
)
from .wavelet_tree import RsBitvector, WaveletTree
from .rec_graph import (
    DirectedGraph,
    VertexModel,
    baseline_delta_decode,
    baseline_delta_encode,
    rec_decode,
    rec_encode,
)
from .quantizer import (
    PqCodebook,
    adc_distance,
    adc_tables,
    kmeans_train,
    pq_decode,
    pq_encode,
    pq_train,
)
from .pq_entropy import (
    cluster_codes_decode,
    cluster_codes_encode,
    code_column_decode,
    code_column_encode,
)
from .ivf_index import IvfIndex, ivf_build, ivf_search, ivf_search_deferred, ivf_stats
from .graph_index import (
    GraphIndex,
    graph_build,
    graph_export_rec,
    graph_import_rec,
    graph_search,
    graph_stats,
)
from .datasets import gen_synthetic, load_vectors, save_vectors
