# 领域模型包