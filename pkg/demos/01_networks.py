"""
Small MLPs in plain numpy
=========================

Forward pass, backprop, a gradient check and one Adam step.
"""
import numpy as np

from amrlab import neural

rng = np.random.default_rng(0)

# a critic-shaped net: 4 inputs (state + action), 50 relu units, linear output
critic = neural.init_network([4, 50, 1], ["relu", "linear"], rng)
x = rng.normal(size=4)
print("Q(x) =", neural.forward(critic, x)[0])
print("parameters:", critic.n_params)

# backward takes the upstream gradient dL/d(output)
grads, dx = neural.backward(critic, x, np.array([1.0]))
print("dQ/dx =", dx)

# compare with central differences on the flat parameter vector
v = neural.flatten(critic)
h = 1e-5
i = int(np.argmax(np.abs(neural.flat_grad(grads))))
vp, vm = v.copy(), v.copy()
vp[i] += h
vm[i] -= h
numeric = (neural.forward(neural.unflatten(critic, vp), x)[0]
           - neural.forward(neural.unflatten(critic, vm), x)[0]) / (2 * h)
print(f"param {i}: analytic {neural.flat_grad(grads)[i]:.8f}  numeric {numeric:.8f}")

# one Adam step against the gradient of Q (gradient descent lowers Q)
opt = neural.make_optimizer(critic, lr=0.002)
before = neural.forward(critic, x)[0]
neural.apply_update(critic, grads, opt)
print(f"Q before {before:.5f}, after one step {neural.forward(critic, x)[0]:.5f}")
