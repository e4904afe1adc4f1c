# 核心配置和基础设施模块