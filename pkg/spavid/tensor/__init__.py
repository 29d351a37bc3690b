from spavid.tensor.tensor import Tensor, ComputationTape, current_tape, reset_tape, backward, \
                                 elementwise, add, sub, mul, div, neg, \
                                 matmul, activation, tanh, sigmoid, relu, softmax, log, clip, \
                                 tsum, tmean, reshape, getitem, stack, row_norms
from spavid.tensor.io import encode_tensor, decode_tensor, save_tensor, load_tensor
from spavid.tensor.gradcheck import numerical_gradient, max_relative_error, check_gradient
