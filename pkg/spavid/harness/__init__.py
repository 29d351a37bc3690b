from spavid.harness.config import ExperimentConfig, parse_config_file, parse_value, load_config, \
                                  config_hash
from spavid.harness.harness import cmd_gen_data, cmd_train, cmd_attack, cmd_sparsity_sweep, \
                                   cmd_propagation_report, cmd_splice_attack, \
                                   cmd_transfer_matrix, cmd_universal, cmd_timing, load_data, \
                                   load_threat_model, attackable_clips, run_attacks, \
                                   propagated_frames
