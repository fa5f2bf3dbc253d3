"""Road-course estimation library.

Estimates the course of the road ahead of a vehicle by fusing three
complementary sources:

* an optical map: road borders extracted from per-pixel scene labels
  (produced by a compact multi-scale convolutional network or any other
  labeler) and tracked over time,
* a radar occupancy grid integrating static roadside reflections,
* a digital map interpolated from sparse surveyed shape points,

tied together by an EKF ego-motion estimate and a particle filter that
matches the occupancy grid against the digital map. A synthetic scenario
generator and an evaluation harness allow the whole pipeline to be
exercised without recorded sensor data.

Subpackage/module map:

== ==================================================================
geometry        poses, frame transforms, cubic Hermite splines
config          pipeline-wide configuration with file round-trip
camera          flat-ground pinhole camera model
labeling        class-membership maps and the label class set
metrics         confusion matrix, accuracy, IU, multi-class MCC
pgm             plain PGM image input/output
nn              multi-scale CNN: inference, training, weight files
sim             synthetic scenario generation and serialization
ego_motion      EKF with constant-turn-rate-and-velocity model
grid_map        radar occupancy grid
digital_map     local spline road model from shape points
map_matching    particle-filter pose matching on the digital map
road_detection  road segmentation, contour borders, ground projection
border_shaping  longitudinal binning into the optical map
fusion          optical/digital road-course blending
pipeline        frame loop, evaluation, reports
cli             command-line front end
== ==================================================================
"""

__version__ = "0.1.0"
