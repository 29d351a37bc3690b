from spavid.attack import prefix_mask
print(prefix_mask(8, 2).bits)