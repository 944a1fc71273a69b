"""Export a MobileNetV2 feature extractor to ONNX for `handscreen`.

The exported graph takes a 1x224x224x3 float tensor in [-1, 1] (the layout
`handscreen` produces) and returns the 1280-value global-average-pooled
feature vector, i.e. the ImageNet network with its classifier removed.

    python3 scripts/export_backbone.py backbone.onnx
    python3 scripts/export_backbone.py --random-weights /tmp/untrained.onnx

Pretrained weights come from torchvision (downloaded on first use). Note
that torchvision's MobileNetV2 was trained on inputs normalized with the
ImageNet mean/std; the wrapper below converts from [-1, 1] accordingly.
"""

import argparse

import torch
import torchvision


class FeatureExtractor(torch.nn.Module):
    def __init__(self, net):
        super().__init__()
        self.features = net.features
        self.register_buffer("mean", torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1))

    def forward(self, x):
        x = x.permute(0, 3, 1, 2)
        x = ((x + 1.0) / 2.0 - self.mean) / self.std
        x = self.features(x)
        return x.mean(dim=(2, 3))


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("out")
    parser.add_argument("--random-weights", action="store_true", help="skip the download (for testing the pipeline)")
    args = parser.parse_args()

    weights = None if args.random_weights else torchvision.models.MobileNet_V2_Weights.IMAGENET1K_V1
    net = torchvision.models.mobilenet_v2(weights=weights).eval()
    model = FeatureExtractor(net).eval()
    dummy = torch.zeros(1, 224, 224, 3)
    with torch.no_grad():
        assert model(dummy).shape == (1, 1280)
        torch.onnx.export(model, dummy, args.out, input_names=["input"], output_names=["embedding"], opset_version=13, dynamo=False)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
