from spavid.attack.config import AttackConfig, TemporalMask, prefix_mask, norm_name, MODES, NORMS
from spavid.attack.objectives import surrogate_loss, norm_l21, norm_l2, per_frame_l2, objective
from spavid.attack.optim import AdamState, adam_step, clip_to_valid, effective_perturbation
from spavid.attack.report import Perturbation, AttackReport
from spavid.attack.attack import attack_single, attack_masked, attack_targeted, attack_universal, \
                                 attack_each, correctly_classified
