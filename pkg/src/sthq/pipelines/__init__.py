"""End-to-end applications: weight compression for a classifier and an image autoencoder."""
