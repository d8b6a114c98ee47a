"""Channel-aware convolutional image codec for a LoRa CubeSat downlink."""
