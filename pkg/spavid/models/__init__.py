from spavid.models.models import ThreatModel, Prediction, param_shapes, init_model, \
                                 forward, forward_batch, predict, predict_labels
from spavid.models.cells import HEAD_KINDS, head_kind_name, n_gates, rnn_step
from spavid.models.train import train, evaluate, direction_accuracy
from spavid.models.io import save_model, load_model
