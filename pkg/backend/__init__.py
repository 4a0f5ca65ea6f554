# Backend package for the Grover decoherence perturbation toolkit
