"""Fixed-dimension embeddings of arbitrary subgraphs learned from truncated random walks."""

__version__ = "0.1.0"

from .errors import DomainError, FormatError, InvariantError, ParseError, SubvecError
from .graph import (Graph, LinkSplit, Subgraph, SubgraphSet, ego_net, induced_subgraph,
                    make_link_split, parse_communities, parse_edge_list, parse_subgraph_set,
                    planted_partition, read_edge_list)
from .walks import Walk, WalkCorpus, build_corpus, random_walk
from .train import (EmbeddingModel, NoiseTable, TrainConfig, TrainingPair, build_noise_table,
                    cosine, dbon_step, dm_step, load_model, save_model, sigmoid, train)
from .oracle import (CoocMatrix, MZero, build_m_zero, count_context_corpus, enumerate_contexts,
                     exhaustive_corpus, bound_check, overlap_paths, verify_pairs)
from .tasks import (CommunityAssignment, LinkRanking, PRFReport, average_precision,
                    community_prf, detect_communities, kmeans, map_score, precision_at_k,
                    predict_links)
