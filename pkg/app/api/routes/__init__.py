# 路由模块包