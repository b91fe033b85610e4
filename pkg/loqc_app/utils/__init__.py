"""
Utils package for the C-sign gate analysis app
Contains settings management and result file helpers
"""
