from setuptools import setup

if __name__ == '__main__':
    setup(
        name='archrecon',
        long_description=open('README.md').read(),
        long_description_content_type='text/markdown',
    )
