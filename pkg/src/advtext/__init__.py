"""advtext: craft and evaluate adversarial samples against convolutional
text classifiers."""

from .driver import (AttackConfig, AttackTrace, CampaignReport, all_ordered_pairs,
                     attack, overlap_study, run_campaign)
from .codec import (Alphabet, Doc, Token, Vocabulary, decode_chars, encode_chars,
                    encode_words, tokenize)
from .engine import CostGradient, Network, TrainConfig, forward, loss_and_gradients
from .models import (ClassifierHandle, EvalReport, build_char_cnn, build_word_cnn,
                     evaluate, external_classifier, full_scale_char_arch,
                     train_classifier)
from .occlusion import DeviationTable, deviations, gen_probes, hsps_black, mine_htps_black
from .perturb import (CandidateScore, Perturbation, PerturbLexicons, apply,
                      direction_check, propose_insertions, propose_modifications,
                      propose_removals, revert)
from .saliency import (CharScore, FgsmResult, HotSpan, HtpEntry, char_scores,
                       fgsm_baseline, hot_items, hsps, mine_htps, word_scores)
from .toydata import make_sentiment_corpus, make_topic_corpus

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
