'''
The version of the KBase spin cooling simulator.
'''

VERSION = "0.1.0"
