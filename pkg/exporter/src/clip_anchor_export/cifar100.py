"""CIFAR-100 category names and their twenty super-categories."""

CIFAR100_SUPERCATEGORIES = {
    "aquatic_mammals": ["beaver", "dolphin", "otter", "seal", "whale"],
    "fish": ["aquarium_fish", "flatfish", "ray", "shark", "trout"],
    "flowers": ["orchid", "poppy", "rose", "sunflower", "tulip"],
    "food_containers": ["bottle", "bowl", "can", "cup", "plate"],
    "fruit_and_vegetables": ["apple", "mushroom", "orange", "pear",
                             "sweet_pepper"],
    "household_electrical_devices": ["clock", "keyboard", "lamp", "telephone",
                                     "television"],
    "household_furniture": ["bed", "chair", "couch", "table", "wardrobe"],
    "insects": ["bee", "beetle", "butterfly", "caterpillar", "cockroach"],
    "large_carnivores": ["bear", "leopard", "lion", "tiger", "wolf"],
    "large_man-made_outdoor_things": ["bridge", "castle", "house", "road",
                                      "skyscraper"],
    "large_natural_outdoor_scenes": ["cloud", "forest", "mountain", "plain",
                                     "sea"],
    "large_omnivores_and_herbivores": ["camel", "cattle", "chimpanzee",
                                       "elephant", "kangaroo"],
    "medium_mammals": ["fox", "porcupine", "possum", "raccoon", "skunk"],
    "non-insect_invertebrates": ["crab", "lobster", "snail", "spider", "worm"],
    "people": ["baby", "boy", "girl", "man", "woman"],
    "reptiles": ["crocodile", "dinosaur", "lizard", "snake", "turtle"],
    "small_mammals": ["hamster", "mouse", "rabbit", "shrew", "squirrel"],
    "trees": ["maple_tree", "oak_tree", "palm_tree", "pine_tree",
              "willow_tree"],
    "vehicles_1": ["bicycle", "bus", "motorcycle", "pickup_truck", "train"],
    "vehicles_2": ["lawn_mower", "rocket", "streetcar", "tank", "tractor"],
}

CIFAR100_LABELS = sorted(
    name for members in CIFAR100_SUPERCATEGORIES.values() for name in members
)


def supercategory_map() -> dict[str, str]:
    """Flat label -> super-category mapping."""
    return {
        name: group
        for group, members in CIFAR100_SUPERCATEGORIES.items()
        for name in members
    }
