"""ADAM optimizer over the non-frozen parameters of a network."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, net, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.net = net
        self.lr = float(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {}
        self.v = {}
        for node_name, pname in net.trainable_parameters():
            arr = net.node(node_name).layer.params[pname]
            self.m[(node_name, pname)] = np.zeros_like(arr)
            self.v[(node_name, pname)] = np.zeros_like(arr)

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for (node_name, pname), m in self.m.items():
            layer = self.net.node(node_name).layer
            if layer.frozen:
                continue
            g = layer.grads[pname]
            v = self.v[(node_name, pname)]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            layer.params[pname] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        for node in self.net.nodes:
            if not node.layer.frozen:
                node.layer.project()

    def reset_moments(self):
        for key in self.m:
            self.m[key][...] = 0.0
            self.v[key][...] = 0.0
        self.t = 0
