# FL-Linear 本地差分隐私选址求解器