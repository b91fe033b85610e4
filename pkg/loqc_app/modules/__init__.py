"""
Modules package for the C-sign gate analysis app
Contains the state algebra, optics, gate constructions, analysis and tuning
"""
